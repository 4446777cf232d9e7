//! Gradient-descent retrieval through the decoder: descend
//! `||f(z) - x|| ^2 - gamma * log p(z; M)` with the reconstruction gradient
//! obtained from the full-stack vector-Jacobian product.

use crate::error::{Error, Result};
use crate::memory::{MemoryMatrix, PriorSpec};
use crate::model::VaeModel;
use crate::numerics::Vector;

use super::{initial_latent, InitMode, RetrievalConfig, RetrievalResult};

/// Iterative inference by backprop on the retrieval loss.
///
/// The latent starts per `config.init` (encoder initialization gives the
/// amortized estimate) and then takes `max_iters` descent steps of size
/// `step_size` on `||f(z) - x||^2 - prior_weight * log p(z; M)`. The loss is
/// recorded at every visited state; non-finite losses abort with the step
/// index.
pub fn bp_gmm_retrieve(
    x: &Vector,
    vae: &VaeModel,
    memory: &MemoryMatrix,
    prior: &PriorSpec,
    config: &RetrievalConfig,
) -> Result<RetrievalResult> {
    if matches!(prior, PriorSpec::Mchn { .. }) {
        return Err(Error::Config(
            "bp_gmm descends a mixture prior; use balanced_gmm or precision_gmm".into(),
        ));
    }
    if x.dim() != vae.obs_dim() {
        return Err(Error::ShapeMismatch {
            op: "bp_gmm_retrieve",
            left: format!("query [{}]", x.dim()),
            right: format!("observation [{}]", vae.obs_dim()),
        });
    }
    if vae.latent_dim() != memory.dim() {
        return Err(Error::Config(format!(
            "decoder latent dimension {} does not match memory dimension {}",
            vae.latent_dim(),
            memory.dim()
        )));
    }
    memory.matrix()?;

    // Query-as-latent only works when the query already lives in latent space.
    let init = match &config.init {
        InitMode::QueryAsZ if x.dim() != memory.dim() => {
            return Err(Error::Config(
                "bp_gmm with query-as-latent initialization needs a latent-space query; \
                 use encoder initialization for observations"
                    .into(),
            ))
        }
        other => other.clone(),
    };
    let mut z = initial_latent(x, Some(vae), memory, &init)?;

    let gamma = config.prior_weight;
    let alpha = config.step_size;
    let loss_and_grad = |z: &Vector| -> Result<(f64, Vector)> {
        let trace = vae.decoder.decode(z)?;
        let resid = trace.output().sub(x)?;
        let recon = resid.dot(&resid)?;
        let log_p = prior.log_density(z, memory)?;
        let loss = recon - gamma * log_p;
        let recon_grad = vae.decoder.vjp_from_trace(&trace, &resid)?;
        let prior_grad = prior.grad_log_density(z, memory)?;
        let grad = Vector::from_fn(z.dim(), |i| 2.0 * recon_grad[i] - gamma * prior_grad[i]);
        Ok((loss, grad))
    };

    let mut energies = Vec::new();
    let mut trajectory = Vec::new();
    if config.log_trajectory {
        trajectory.push(z.clone());
    }
    let mut iterations_used = 0;
    for step in 0..config.max_iters {
        let (loss, grad) = loss_and_grad(&z)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "retrieval loss diverged at step {step}"
            )));
        }
        if config.log_energies {
            energies.push(loss);
        }
        let next = Vector::from_fn(z.dim(), |i| z[i] - alpha * grad[i]);
        let delta = next.sub(&z)?.norm_inf();
        z = next;
        iterations_used += 1;
        if config.log_trajectory {
            trajectory.push(z.clone());
        }
        if delta < config.tol {
            break;
        }
    }
    if config.log_energies {
        let (final_loss, _) = loss_and_grad(&z)?;
        if !final_loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "retrieval loss diverged at step {iterations_used}"
            )));
        }
        energies.push(final_loss);
    }
    let (matched_index, matched_distance) = memory.nearest(&z)?;
    Ok(RetrievalResult {
        z_final: z,
        trajectory: super::thin_trajectory(trajectory),
        energies,
        iterations_used,
        matched_index,
        matched_distance,
    })
}
