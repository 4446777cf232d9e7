//! Command-line wiring for the retrieval library: train models, build
//! memories, run retrievals, benchmarks, sweeps and landscape exports.
//!
//! Subcommands: `train-vae`, `store`, `retrieve`, `benchmark`, `capacity`,
//! `landscape`, `train-precision`, `generate`. Global flags: `--config
//! <path>`, `--seed <u64>`, `--out <dir>`, `--workers <n>`. Exit codes: 0
//! success, 1 usage or configuration error, 2 numeric failure.

pub mod commands;
pub mod config;

use std::fmt;

use config::CliConfig;

/// CLI-level failures, carrying their process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad command line: unknown subcommand or flag, missing argument.
    Usage(String),
    /// Bad configuration or input artifact.
    Config(String),
    /// A numeric computation failed (diverged, produced non-finite values).
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage: {msg}"),
            CliError::Config(msg) => write!(f, "config: {msg}"),
            CliError::Numeric(msg) => write!(f, "numeric: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<recall_core::Error> for CliError {
    fn from(e: recall_core::Error) -> Self {
        match e {
            recall_core::Error::NonFinite(msg) => CliError::Numeric(msg),
            other => CliError::Config(other.to_string()),
        }
    }
}

pub const USAGE: &str = "\
recall <command> [flags]

commands:
  train-vae          train the toy VAE on the bundled synthetic task
  store              write input vectors (latents or observations) into a memory
  retrieve           run one retrieval against a stored memory
  benchmark          run the scenario grid and write CSV/JSON reports
  capacity           success rate as a function of the store size
  landscape          export a 2-D energy grid and its detected minima
  train-precision    train diagonal precision on the subspace-noise task
  generate           decode samples drawn from the memory-dependent prior

flags:
  --config <path>    JSON configuration (defaults apply when omitted)
  --seed <u64>       override the master seed
  --out <dir>        override the output directory
  --workers <n>      cap parallel fan-out
  --inputs <path>    store: vectors to write, one per line
  --query <path>     retrieve: query vector, one line
  --help             show this help";

/// Parsed invocation.
pub struct Invocation {
    pub command: String,
    pub config: CliConfig,
    pub inputs: Option<String>,
    pub query: Option<String>,
}

fn parse_flag_value<'a>(
    flag: &str,
    args: &'a [String],
    i: &mut usize,
) -> Result<&'a str, CliError> {
    *i += 1;
    args.get(*i)
        .map(|s| s.as_str())
        .ok_or_else(|| CliError::Usage(format!("{flag} needs a value")))
}

/// Parse arguments and run the requested command. Returns the text to print
/// on stdout.
pub fn run(args: &[String]) -> Result<String, CliError> {
    if args.is_empty() {
        return Err(CliError::Usage(format!("no command given\n{USAGE}")));
    }
    if args[0] == "--help" || args[0] == "help" {
        return Ok(USAGE.to_string());
    }
    let command = args[0].clone();

    let mut config_path: Option<String> = None;
    let mut seed: Option<u64> = None;
    let mut out: Option<String> = None;
    let mut workers: Option<usize> = None;
    let mut inputs: Option<String> = None;
    let mut query: Option<String> = None;

    let mut i = 1;
    while i < args.len() {
        match args[i].as_str() {
            "--config" => config_path = Some(parse_flag_value("--config", args, &mut i)?.into()),
            "--seed" => {
                let v = parse_flag_value("--seed", args, &mut i)?;
                seed = Some(
                    v.parse()
                        .map_err(|_| CliError::Usage(format!("bad seed '{v}'")))?,
                );
            }
            "--out" => out = Some(parse_flag_value("--out", args, &mut i)?.into()),
            "--workers" => {
                let v = parse_flag_value("--workers", args, &mut i)?;
                workers = Some(
                    v.parse()
                        .map_err(|_| CliError::Usage(format!("bad worker count '{v}'")))?,
                );
            }
            "--inputs" => inputs = Some(parse_flag_value("--inputs", args, &mut i)?.into()),
            "--query" => query = Some(parse_flag_value("--query", args, &mut i)?.into()),
            "--help" => return Ok(USAGE.to_string()),
            other => return Err(CliError::Usage(format!("unknown flag '{other}'\n{USAGE}"))),
        }
        i += 1;
    }

    let mut config = match config_path {
        Some(path) => CliConfig::load(&path)?,
        None => CliConfig::default(),
    };
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(o) = out {
        config.output.directory = o;
    }
    if let Some(w) = workers {
        config.workers = Some(w);
    }

    let invocation = Invocation {
        command: command.clone(),
        config,
        inputs,
        query,
    };
    match command.as_str() {
        "train-vae" => commands::cmd_train_vae(&invocation),
        "store" => commands::cmd_store(&invocation),
        "retrieve" => commands::cmd_retrieve(&invocation),
        "benchmark" => commands::cmd_benchmark(&invocation),
        "capacity" => commands::cmd_capacity(&invocation),
        "landscape" => commands::cmd_landscape(&invocation),
        "train-precision" => commands::cmd_train_precision(&invocation),
        "generate" => commands::cmd_generate(&invocation),
        other => Err(CliError::Usage(format!(
            "unknown command '{other}'\n{USAGE}"
        ))),
    }
}
