//! Pattern store and the prior families over latent representations.

mod prior;
mod store;

pub use prior::{
    grad_log_prior_balanced, grad_log_prior_precision, log_prior_balanced, log_prior_mchn,
    log_prior_precision, mchn_energy, sample_prior, Precision, PriorSpec,
};
pub use store::MemoryMatrix;
