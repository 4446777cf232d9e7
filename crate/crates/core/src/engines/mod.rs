//! Iterative retrieval engines.
//!
//! Six inference loops share one result shape:
//!
//! - `mchn` — softmax attention over dot-product scores scaled by beta; the
//!   exact one-step form of the continuous Hopfield update
//! - `gmm` — softmax attention over negative squared distances scaled by
//!   `1/(2 sigma^2)`; the exact one-step form for the balanced mixture prior
//! - `gmm_smooth` — the same readout applied with a finite step
//!   `alpha/sigma^2`, descending the negative mixture log-density
//! - `precision` — Mahalanobis-weighted attention under a shared precision
//! - `bp_gmm` — gradient descent on
//!   `||f(z) - x||^2 - gamma log p(z; M)` through the decoder
//! - `pc_gmm` — the full predictive-coding network: per-layer estimates and
//!   prediction errors relaxed jointly
//!
//! Every engine stops after `max_iters` steps or when the latent moves less
//! than `tol` in the max norm, and reports the trajectory (optionally),
//! per-step energies, and the nearest stored pattern.

mod bp;
mod pc;
mod steps;

pub use bp::bp_gmm_retrieve;
pub use pc::{pc_fixed_prediction_step, pc_gmm_retrieve, pc_sweep, PcState};
pub use steps::{gmm_smooth_step, gmm_step, mchn_grad_step, mchn_step, precision_step};

use crate::error::{Error, Result};
use crate::memory::{log_prior_balanced, log_prior_precision, mchn_energy, MemoryMatrix, PriorSpec};
use crate::model::VaeModel;
use crate::numerics::Vector;

/// How the latent estimate is initialized.
#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// Use the query itself as the first latent estimate (the Hopfield
    /// convention; requires the query to live in latent space).
    QueryAsZ,
    /// Amortized initialization: the encoder's posterior mean.
    Encoder,
    /// Caller-provided starting point.
    Explicit(Vector),
}

/// Knobs shared by every engine.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalConfig {
    /// Hard iteration cap T.
    pub max_iters: usize,
    /// Descent step alpha for the smoothed/gradient engines. The one-step
    /// engines (`mchn`, `gmm`, `precision`) ignore it.
    pub step_size: f64,
    /// Prior weight gamma in the descent loss.
    pub prior_weight: f64,
    /// Stop once the latent moves less than this in max norm.
    pub tol: f64,
    pub init: InitMode,
    /// Record the latent trajectory (capped and thinned to 1000 points).
    pub log_trajectory: bool,
    /// Record the engine's energy at every visited state.
    pub log_energies: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            max_iters: 200,
            step_size: 0.05,
            prior_weight: 2.0,
            tol: 1e-7,
            init: InitMode::QueryAsZ,
            log_trajectory: false,
            log_energies: true,
        }
    }
}

/// Engine selector for the dispatcher and the benchmark grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EngineKind {
    Mchn,
    Gmm,
    GmmSmooth,
    Precision,
    BpGmm,
    PcGmm,
}

impl EngineKind {
    pub fn label(self) -> &'static str {
        match self {
            EngineKind::Mchn => "mchn",
            EngineKind::Gmm => "gmm",
            EngineKind::GmmSmooth => "gmm_smooth",
            EngineKind::Precision => "precision",
            EngineKind::BpGmm => "bp_gmm",
            EngineKind::PcGmm => "pc_gmm",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "mchn" => Ok(EngineKind::Mchn),
            "gmm" => Ok(EngineKind::Gmm),
            "gmm_smooth" => Ok(EngineKind::GmmSmooth),
            "precision" => Ok(EngineKind::Precision),
            "bp_gmm" => Ok(EngineKind::BpGmm),
            "pc_gmm" => Ok(EngineKind::PcGmm),
            other => Err(Error::Config(format!("unknown engine '{other}'"))),
        }
    }
}

/// Outcome of one retrieval.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalResult {
    pub z_final: Vector,
    /// Visited latents (empty unless trajectory logging is on).
    pub trajectory: Vec<Vector>,
    /// Energy at every visited state; length `iterations_used + 1` when
    /// energy logging is on, empty otherwise.
    pub energies: Vec<f64>,
    pub iterations_used: usize,
    /// Index of the nearest stored pattern (0-based, lowest index on ties).
    pub matched_index: usize,
    pub matched_distance: f64,
}

const TRAJECTORY_CAP: usize = 1000;

/// Uniformly thin a trajectory down to the cap, always keeping the first and
/// last points.
fn thin_trajectory(mut traj: Vec<Vector>) -> Vec<Vector> {
    if traj.len() <= TRAJECTORY_CAP {
        return traj;
    }
    let last = traj.pop().expect("non-empty");
    let stride = traj.len().div_ceil(TRAJECTORY_CAP - 1);
    let mut thinned: Vec<Vector> = traj.into_iter().step_by(stride).collect();
    thinned.push(last);
    thinned
}

/// Shared generic loop for the one-step and smoothed engines.
pub(crate) fn run_step_loop(
    z0: Vector,
    memory: &MemoryMatrix,
    config: &RetrievalConfig,
    mut step: impl FnMut(&Vector) -> Result<Vector>,
    mut energy: impl FnMut(&Vector) -> Result<f64>,
) -> Result<RetrievalResult> {
    let mut z = z0;
    let mut energies = Vec::new();
    let mut trajectory = Vec::new();
    if config.log_trajectory {
        trajectory.push(z.clone());
    }
    let mut iterations_used = 0;
    for _ in 0..config.max_iters {
        if config.log_energies {
            energies.push(energy(&z)?);
        }
        let next = step(&z)?;
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
        energies.push(energy(&z)?);
    }
    let (matched_index, matched_distance) = memory.nearest(&z)?;
    Ok(RetrievalResult {
        z_final: z,
        trajectory: thin_trajectory(trajectory),
        energies,
        iterations_used,
        matched_index,
        matched_distance,
    })
}

pub(crate) fn initial_latent(
    query: &Vector,
    model: Option<&VaeModel>,
    memory: &MemoryMatrix,
    init: &InitMode,
) -> Result<Vector> {
    match init {
        InitMode::QueryAsZ => {
            if query.dim() != memory.dim() {
                return Err(Error::Config(format!(
                    "query-as-latent initialization needs a query of dimension {}, got {}",
                    memory.dim(),
                    query.dim()
                )));
            }
            Ok(query.clone())
        }
        InitMode::Encoder => {
            let model = model.ok_or_else(|| {
                Error::Config("encoder initialization requires a model".into())
            })?;
            let z = model.encode_mean(query)?;
            if z.dim() != memory.dim() {
                return Err(Error::Config(format!(
                    "encoder latent dimension {} does not match memory dimension {}",
                    z.dim(),
                    memory.dim()
                )));
            }
            Ok(z)
        }
        InitMode::Explicit(v) => {
            if v.dim() != memory.dim() {
                return Err(Error::Config(format!(
                    "explicit initialization has dimension {}, memory needs {}",
                    v.dim(),
                    memory.dim()
                )));
            }
            Ok(v.clone())
        }
    }
}

/// Uniform dispatch over the engine family. Validates the engine/prior
/// pairing, initializes the latent per `config.init`, runs the loop, and
/// fills the matched-pattern fields.
pub fn retrieve(
    query: &Vector,
    model: Option<&VaeModel>,
    memory: &MemoryMatrix,
    prior: &PriorSpec,
    engine: EngineKind,
    config: &RetrievalConfig,
) -> Result<RetrievalResult> {
    match (engine, prior) {
        (EngineKind::Mchn, PriorSpec::Mchn { beta }) => {
            let beta = *beta;
            let z0 = initial_latent(query, model, memory, &config.init)?;
            run_step_loop(
                z0,
                memory,
                config,
                |z| mchn_step(z, memory, beta),
                |z| mchn_energy(z, memory, beta),
            )
        }
        (EngineKind::Gmm, PriorSpec::BalancedGmm { sigma }) => {
            let sigma = *sigma;
            let z0 = initial_latent(query, model, memory, &config.init)?;
            run_step_loop(
                z0,
                memory,
                config,
                |z| gmm_step(z, memory, sigma),
                |z| Ok(-log_prior_balanced(z, memory, sigma)?),
            )
        }
        (EngineKind::GmmSmooth, PriorSpec::BalancedGmm { sigma }) => {
            let sigma = *sigma;
            let alpha = config.step_size;
            let z0 = initial_latent(query, model, memory, &config.init)?;
            run_step_loop(
                z0,
                memory,
                config,
                |z| gmm_smooth_step(z, memory, sigma, alpha),
                |z| Ok(-log_prior_balanced(z, memory, sigma)?),
            )
        }
        (EngineKind::Precision, PriorSpec::PrecisionGmm { precision }) => {
            let z0 = initial_latent(query, model, memory, &config.init)?;
            run_step_loop(
                z0,
                memory,
                config,
                |z| precision_step(z, memory, precision),
                |z| Ok(-log_prior_precision(z, memory, precision)?),
            )
        }
        (EngineKind::BpGmm, PriorSpec::BalancedGmm { .. })
        | (EngineKind::BpGmm, PriorSpec::PrecisionGmm { .. }) => {
            let model = model.ok_or_else(|| {
                Error::Config("the bp_gmm engine requires a trained model".into())
            })?;
            bp_gmm_retrieve(query, model, memory, prior, config)
        }
        (EngineKind::PcGmm, PriorSpec::BalancedGmm { sigma }) => {
            let model = model.ok_or_else(|| {
                Error::Config("the pc_gmm engine requires a trained model".into())
            })?;
            pc_gmm_retrieve(query, Some(model), &model.decoder, memory, *sigma, config)
        }
        (engine, prior) => Err(Error::Config(format!(
            "engine '{}' cannot run with prior '{}'",
            engine.label(),
            prior.kind_name()
        ))),
    }
}
