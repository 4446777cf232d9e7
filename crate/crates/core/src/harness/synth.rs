//! Synthetic memories, query corruption, and the retrieval success judge.

use crate::error::{Error, Result};
use crate::memory::{sample_prior, MemoryMatrix};
use crate::model::{Activation, LayerStack, VaeModel};
use crate::numerics::{RngStream, Vector};

use super::Scenario;

/// i.i.d. standard-normal patterns, rejection-resampled until every pair is
/// at least `min_separation` apart. Returns the store plus the generating
/// latents. Fails once the draw budget of `10 * n` is spent.
pub fn make_synthetic_memory(
    n: usize,
    d: usize,
    rng: &mut RngStream,
    min_separation: f64,
) -> Result<(MemoryMatrix, Vec<Vector>)> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidParameter(format!(
            "need positive pattern count and dimension, got n={n}, d={d}"
        )));
    }
    let min_sq = min_separation * min_separation;
    let mut patterns: Vec<Vector> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while patterns.len() < n {
        attempts += 1;
        if attempts > 10 * n {
            return Err(Error::SeparationUnsatisfied { attempts });
        }
        let candidate = rng.normal_vector(d);
        let ok = patterns
            .iter()
            .all(|p| p.squared_distance(&candidate).unwrap() >= min_sq);
        if ok {
            patterns.push(candidate);
        }
    }
    Ok((MemoryMatrix::from_patterns(&patterns)?, patterns))
}

/// Output scale of the bundled observation generator. Large enough that the
/// reconstruction term dominates the KL term during VAE training.
pub const OBSERVATION_SCALE: f64 = 3.0;

/// Observations from a fixed random smooth generator: latents drawn standard
/// normal, pushed through a one-hidden-layer tanh map and scaled by
/// [`OBSERVATION_SCALE`]. The bundled training task for the toy VAE.
pub fn synthetic_observations(
    count: usize,
    obs_dim: usize,
    latent_dim: usize,
    rng: &mut RngStream,
) -> Result<Vec<Vector>> {
    let generator = LayerStack::random(
        &[latent_dim, 2 * obs_dim, obs_dim],
        &[Activation::Tanh, Activation::Identity],
        &mut rng.substream("generator"),
    )?;
    let mut draws = rng.substream("latents");
    (0..count)
        .map(|_| {
            generator
                .forward(&draws.normal_vector(latent_dim))
                .map(|x| x.scale(OBSERVATION_SCALE))
        })
        .collect()
}

/// Apply a scenario's corruption to one query vector. The scenario's space
/// tag says which vector the caller should pass; the corruption itself is
/// space-agnostic.
pub fn corrupt(query: &Vector, scenario: &Scenario, rng: &mut RngStream) -> Result<Vector> {
    scenario.validate(query.dim())?;
    match &scenario.corruption {
        super::Corruption::Clean => Ok(query.clone()),
        super::Corruption::GaussianNoise { std } => {
            Ok(Vector::from_fn(query.dim(), |i| query[i] + std * rng.normal()))
        }
        super::Corruption::Mask { fraction } => {
            let dim = query.dim();
            let len = ((fraction * dim as f64).ceil() as usize).min(dim);
            let offset = if len >= dim {
                0
            } else {
                rng.next_below(dim - len + 1)
            };
            Ok(Vector::from_fn(dim, |i| {
                if i >= offset && i < offset + len {
                    0.0
                } else {
                    query[i]
                }
            }))
        }
        super::Corruption::SubspaceNoise { dims, std } => {
            let mut out = query.clone();
            for &j in dims {
                out[j] += std * rng.normal();
            }
            Ok(out)
        }
    }
}

/// True iff the retrieved latent lies within `tau` of the target pattern.
pub fn judge_success(
    z_final: &Vector,
    target: usize,
    memory: &MemoryMatrix,
    tau: f64,
) -> Result<bool> {
    if tau <= 0.0 || tau.is_nan() {
        return Err(Error::InvalidParameter(format!(
            "tau must be positive, got {tau}"
        )));
    }
    let pattern = memory.pattern(target)?;
    Ok(z_final.sub(&pattern)?.norm() < tau)
}

/// Deterministic success threshold: half the minimum pairwise distance of
/// the store, which makes success imply a correct nearest match. With fewer
/// than two patterns there is nothing to confuse, so the threshold is
/// unbounded.
pub fn default_tau(memory: &MemoryMatrix) -> f64 {
    memory
        .min_pairwise_distance()
        .map_or(f64::INFINITY, |d| 0.5 * d)
}

/// Decode `count` draws from the memory-dependent prior: each sample picks a
/// stored pattern, perturbs it at scale `sigma`, and decodes it.
pub fn one_shot_generate(
    vae: &VaeModel,
    memory: &MemoryMatrix,
    sigma: f64,
    count: usize,
    rng: &mut RngStream,
) -> Result<Vec<Vector>> {
    memory.matrix()?;
    (0..count)
        .map(|_| {
            let z = sample_prior(memory, sigma, rng)?;
            vae.decode(&z)
        })
        .collect()
}

/// The four-pattern plane construction with one pattern aligned with, and
/// shorter than, another: (1,0) lies on the ray to (2,0). Under dot-product
/// attention the shorter pattern is not an attractor; under the balanced
/// mixture every pattern keeps its own basin.
pub fn aligned_dominated_memory() -> MemoryMatrix {
    MemoryMatrix::from_patterns(&[
        Vector::new(vec![1.0, 0.0]),
        Vector::new(vec![2.0, 0.0]),
        Vector::new(vec![0.0, 1.5]),
        Vector::new(vec![-1.2, -1.2]),
    ])
    .expect("static patterns are valid")
}

/// Index of the dominated pattern inside [`aligned_dominated_memory`].
pub const DOMINATED_INDEX: usize = 0;
