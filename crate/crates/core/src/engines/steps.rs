//! One-step update rules: softmax attention readouts over the stored
//! patterns, under three similarity measures.
//!
//! Every readout is a convex combination of memory columns, so outputs stay
//! inside the per-coordinate envelope of the store.

use crate::error::{Error, Result};
use crate::memory::{MemoryMatrix, Precision};
use crate::numerics::{softmax, squared_distance_columns, Vector};

fn check_query(z: &Vector, memory: &MemoryMatrix, op: &'static str) -> Result<()> {
    if z.dim() != memory.dim() {
        return Err(Error::ShapeMismatch {
            op,
            left: format!("query [{}]", z.dim()),
            right: format!("memory dim [{}]", memory.dim()),
        });
    }
    Ok(())
}

/// softmax(beta z'M) M' — attention over dot-product scores.
pub fn mchn_step(z: &Vector, memory: &MemoryMatrix, beta: f64) -> Result<Vector> {
    check_query(z, memory, "mchn_step")?;
    if beta <= 0.0 || beta.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let mat = memory.matrix()?;
    let dots = mat.matvec_transpose(z)?;
    let scores = Vector::from_fn(dots.dim(), |k| beta * dots[k]);
    let weights = softmax(&scores)?;
    mat.matvec(&weights)
}

/// General-rate gradient step on the Hopfield energy:
/// `z + alpha * beta * (softmax(beta z'M) M' - z)`. At `alpha = 1/beta` this
/// is exactly [`mchn_step`].
pub fn mchn_grad_step(z: &Vector, memory: &MemoryMatrix, beta: f64, alpha: f64) -> Result<Vector> {
    let readout = mchn_step(z, memory, beta)?;
    Ok(Vector::from_fn(z.dim(), |i| {
        z[i] + alpha * beta * (readout[i] - z[i])
    }))
}

/// softmax(-||z - M||^2 / (2 sigma^2)) M' — attention over negative squared
/// distances; the fixed-point update for the balanced mixture prior.
pub fn gmm_step(z: &Vector, memory: &MemoryMatrix, sigma: f64) -> Result<Vector> {
    check_query(z, memory, "gmm_step")?;
    if sigma <= 0.0 || sigma.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let mat = memory.matrix()?;
    let dists = squared_distance_columns(z, mat)?;
    let scores = Vector::from_fn(dists.dim(), |k| -dists[k] / (2.0 * sigma * sigma));
    let weights = softmax(&scores)?;
    mat.matvec(&weights)
}

/// Finite-rate relaxation towards the [`gmm_step`] readout:
/// `z + alpha/sigma^2 * (readout - z)`. At `alpha = sigma^2` this reduces to
/// [`gmm_step`]; for small `alpha` it descends the negative mixture
/// log-density.
pub fn gmm_smooth_step(
    z: &Vector,
    memory: &MemoryMatrix,
    sigma: f64,
    alpha: f64,
) -> Result<Vector> {
    if alpha <= 0.0 || alpha.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "alpha must be positive, got {alpha}"
        )));
    }
    let readout = gmm_step(z, memory, sigma)?;
    let rate = alpha / (sigma * sigma);
    Ok(Vector::from_fn(z.dim(), |i| {
        z[i] + rate * (readout[i] - z[i])
    }))
}

/// softmax(-1/2 (z - M)' P (z - M)) M' — Mahalanobis-weighted attention
/// under a shared precision.
pub fn precision_step(z: &Vector, memory: &MemoryMatrix, precision: &Precision) -> Result<Vector> {
    check_query(z, memory, "precision_step")?;
    let mat = memory.matrix()?;
    let mahal = precision.mahalanobis_columns(z, mat)?;
    let scores = Vector::from_fn(mahal.dim(), |k| -0.5 * mahal[k]);
    let weights = softmax(&scores)?;
    mat.matvec(&weights)
}
