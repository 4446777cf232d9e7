//! Shared error type for the whole library.

use std::fmt;

/// Errors produced by numerics, models, priors, retrieval engines and the
/// experiment harness.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A reduction (log-sum-exp, softmax) was asked to run over zero elements.
    EmptyReduction,
    /// A prior density, energy or retrieval step was evaluated against a
    /// memory holding no patterns.
    EmptyMemory,
    /// Operand shapes do not line up. Both shapes are reported.
    ShapeMismatch {
        op: &'static str,
        left: String,
        right: String,
    },
    /// A scalar or structural parameter is outside its valid range.
    InvalidParameter(String),
    /// An engine/prior/model combination that the dispatcher cannot run.
    Config(String),
    /// A non-finite value appeared where finite arithmetic is required
    /// (e.g. a training or retrieval loss diverged).
    NonFinite(String),
    /// Synthetic memory generation could not satisfy the separation
    /// constraint within its resampling budget.
    SeparationUnsatisfied { attempts: usize },
    /// A persisted artifact failed to parse. Line numbers are 1-based.
    Parse { line: usize, message: String },
    /// Underlying I/O failure.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyReduction => write!(f, "empty reduction"),
            Error::EmptyMemory => write!(f, "empty memory"),
            Error::ShapeMismatch { op, left, right } => {
                write!(f, "{op}: shape mismatch between {left} and {right}")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            Error::SeparationUnsatisfied { attempts } => write!(
                f,
                "could not satisfy min separation after {attempts} resampling attempts; \
                 try fewer patterns or a smaller separation"
            ),
            Error::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Error::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
