//! Memory-based variational inference for auto-associative retrieval.
//!
//! A query is treated as evidence for a latent representation whose prior is
//! centered on previously stored patterns; retrieval is inference under that
//! prior. The crate provides:
//!
//! - [`numerics`] — dense f64 vectors/matrices, stable reductions, seeded RNG
//! - [`model`] — small MLP decoder/encoder stacks, reverse-mode derivatives,
//!   and a trainable toy VAE for amortized initial estimates
//! - [`memory`] — the pattern store and the prior families over latents
//!   (balanced Gaussian mixture, norm-biased Hopfield mixture, trainable
//!   diagonal precision)
//! - [`engines`] — the iterative retrieval dynamics: softmax attention steps,
//!   gradient-descent retrieval through the decoder, and the full
//!   predictive-coding network
//! - [`precision`] — training of diagonal precision coefficients on retrieval
//!   tasks with systematically corrupted queries
//! - [`harness`] — synthetic benchmarks, capacity sweeps, energy-landscape
//!   grids and one-shot generation, with deterministic seeding and CSV/JSON
//!   reports

pub mod engines;
pub mod error;
pub mod harness;
pub mod memory;
pub mod model;
pub mod numerics;
pub mod precision;

pub use error::{Error, Result};
