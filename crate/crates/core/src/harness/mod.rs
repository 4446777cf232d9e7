//! Benchmark harness: scenario grids, capacity sweeps, energy landscapes and
//! one-shot generation, all seed-deterministic.
//!
//! Every grid cell (engine x scenario x seed) draws from an RNG substream
//! keyed by its coordinates, so results are bit-identical across runs and
//! across worker counts; parallel fan-out only changes when cells run, never
//! what they compute. Query corruption is keyed by (seed, scenario) alone,
//! so every engine faces exactly the same corrupted queries.

mod landscape;
mod synth;

pub use landscape::{energy_landscape, LandscapeGrid, LandscapePrior};
pub use synth::{
    aligned_dominated_memory, corrupt, default_tau, judge_success, make_synthetic_memory,
    one_shot_generate, synthetic_observations, DOMINATED_INDEX, OBSERVATION_SCALE,
};

use rayon::prelude::*;
use serde::Serialize;
use std::time::Instant;

use crate::engines::{retrieve, EngineKind, InitMode, RetrievalConfig};
use crate::error::{Error, Result};
use crate::memory::{MemoryMatrix, PriorSpec};
use crate::model::VaeModel;
use crate::numerics::{RngStream, Vector};

/// Default scale of the balanced mixture prior in benchmark grids.
pub const DEFAULT_SIGMA: f64 = 0.5;
/// Default sharpness of the Hopfield prior in benchmark grids. Chosen near
/// the engine's success plateau on the default grid (higher beta buys less
/// than a point), so the dot-product baseline competes at its best.
pub const DEFAULT_BETA: f64 = 8.0;

/// How a query is corrupted before retrieval.
#[derive(Debug, Clone, PartialEq)]
pub enum Corruption {
    Clean,
    GaussianNoise { std: f64 },
    /// Zero a contiguous block covering `fraction` of the coordinates, at a
    /// seeded random offset.
    Mask { fraction: f64 },
    /// Gaussian noise restricted to the listed dimensions.
    SubspaceNoise { dims: Vec<usize>, std: f64 },
}

/// Which vector the corruption applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Latent,
    Observation,
}

/// A corruption plus the space it acts in.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub corruption: Corruption,
    pub space: Space,
}

impl Scenario {
    pub fn latent(corruption: Corruption) -> Self {
        Scenario {
            corruption,
            space: Space::Latent,
        }
    }

    pub fn observation(corruption: Corruption) -> Self {
        Scenario {
            corruption,
            space: Space::Observation,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match &self.corruption {
            Corruption::Clean => Ok(()),
            Corruption::GaussianNoise { std } => {
                if *std < 0.0 || !std.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "noise std must be non-negative, got {std}"
                    )));
                }
                Ok(())
            }
            Corruption::Mask { fraction } => {
                if !(*fraction > 0.0 && *fraction < 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "mask fraction must lie in (0,1), got {fraction}"
                    )));
                }
                Ok(())
            }
            Corruption::SubspaceNoise { dims, std } => {
                if *std < 0.0 || !std.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "noise std must be non-negative, got {std}"
                    )));
                }
                if dims.iter().any(|&j| j >= dim) {
                    return Err(Error::InvalidParameter(format!(
                        "subspace dimension out of range for d={dim}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Stable label used in report rows and RNG substream keys.
    pub fn label(&self) -> String {
        let body = match &self.corruption {
            Corruption::Clean => "clean".to_string(),
            Corruption::GaussianNoise { std } => format!("noise{std}"),
            Corruption::Mask { fraction } => format!("mask{fraction}"),
            Corruption::SubspaceNoise { dims, std } => {
                format!("subspace{}x{std}", dims.len())
            }
        };
        match self.space {
            Space::Latent => body,
            Space::Observation => format!("obs_{body}"),
        }
    }
}

/// An engine paired with the prior it retrieves under.
#[derive(Debug, Clone)]
pub struct EngineSetup {
    pub kind: EngineKind,
    pub prior: PriorSpec,
}

impl EngineSetup {
    pub fn gmm(sigma: f64) -> Result<Self> {
        Ok(EngineSetup {
            kind: EngineKind::Gmm,
            prior: PriorSpec::balanced(sigma)?,
        })
    }

    pub fn mchn(beta: f64) -> Result<Self> {
        Ok(EngineSetup {
            kind: EngineKind::Mchn,
            prior: PriorSpec::mchn(beta)?,
        })
    }
}

/// Full description of one benchmark run.
#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub dim: usize,
    pub n_patterns: usize,
    pub min_separation: f64,
    pub engines: Vec<EngineSetup>,
    pub scenarios: Vec<Scenario>,
    /// Seed identifiers; each gets its own memory instance.
    pub seeds: Vec<u64>,
    pub retrieval: RetrievalConfig,
    pub master_seed: u64,
    /// Required for observation-space scenarios and decoder-based engines.
    pub model: Option<VaeModel>,
}

impl BenchmarkSpec {
    /// The desk-scale default grid: d=16, N=100 patterns at separation 1.0,
    /// distance attention vs dot-product attention, clean plus noise
    /// (0.2, 0.6) plus masks (0.25, 0.56), 10 seeds.
    pub fn default_grid(master_seed: u64) -> Result<Self> {
        Ok(BenchmarkSpec {
            dim: 16,
            n_patterns: 100,
            min_separation: 1.0,
            engines: vec![EngineSetup::gmm(DEFAULT_SIGMA)?, EngineSetup::mchn(DEFAULT_BETA)?],
            scenarios: vec![
                Scenario::latent(Corruption::Clean),
                Scenario::latent(Corruption::GaussianNoise { std: 0.2 }),
                Scenario::latent(Corruption::GaussianNoise { std: 0.6 }),
                Scenario::latent(Corruption::Mask { fraction: 0.25 }),
                Scenario::latent(Corruption::Mask { fraction: 0.56 }),
            ],
            seeds: (0..10).collect(),
            retrieval: RetrievalConfig {
                log_energies: false,
                ..RetrievalConfig::default()
            },
            master_seed,
            model: None,
        })
    }

    fn validate(&self) -> Result<()> {
        if self.engines.is_empty() || self.scenarios.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config(
                "benchmark needs at least one engine, one scenario and one seed".into(),
            ));
        }
        if self.n_patterns == 0 || self.dim == 0 {
            return Err(Error::Config("benchmark needs positive n and d".into()));
        }
        let needs_model = self
            .engines
            .iter()
            .any(|e| matches!(e.kind, EngineKind::BpGmm | EngineKind::PcGmm))
            || self
                .scenarios
                .iter()
                .any(|s| s.space == Space::Observation);
        if needs_model && self.model.is_none() {
            return Err(Error::Config(
                "this grid needs a trained model (decoder-based engine or \
                 observation-space scenario requested); train one with train-vae"
                    .into(),
            ));
        }
        if let Some(model) = &self.model {
            if model.latent_dim() != self.dim {
                return Err(Error::Config(format!(
                    "model latent dimension {} does not match benchmark d={}",
                    model.latent_dim(),
                    self.dim
                )));
            }
        }
        Ok(())
    }
}

/// One aggregated report row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkRow {
    pub engine: String,
    pub scenario: String,
    pub seed_count: usize,
    /// Mean success percentage across seeds.
    pub success_mean: f64,
    /// Population standard deviation of the per-seed success percentages.
    pub success_std: f64,
    pub iters_mean: f64,
    /// Total wall time of the row's cells. The only nondeterministic field.
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkReport {
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("engine,scenario,seed_count,success_mean,success_std,iters_mean,wall_ms\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.4},{:.4},{:.4},{}\n",
                row.engine,
                row.scenario,
                row.seed_count,
                row.success_mean,
                row.success_std,
                row.iters_mean,
                row.wall_ms
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The deterministic payload: the CSV with the wall-time column blanked,
    /// used by idempotence checks (wall time is the one timing field).
    pub fn csv_deterministic(&self) -> String {
        let mut out = String::new();
        for line in self.to_csv().lines() {
            let mut fields: Vec<&str> = line.split(',').collect();
            if let Some(last) = fields.last_mut() {
                if *last != "wall_ms" {
                    *last = "-";
                }
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    pub fn row(&self, engine: &str, scenario: &str) -> Option<&BenchmarkRow> {
        self.rows
            .iter()
            .find(|r| r.engine == engine && r.scenario == scenario)
    }
}

/// Per-seed shared data: one memory instance, reused by every engine and
/// scenario so comparisons run on identical instances.
struct SeedData {
    latents: Vec<Vector>,
    latent_memory: MemoryMatrix,
    latent_tau: f64,
    observed: Option<ObservedData>,
}

/// The observation-level view when a model participates: decoded patterns
/// and the memory of their re-encoded latents.
struct ObservedData {
    observations: Vec<Vector>,
    memory: MemoryMatrix,
    tau: f64,
}

fn build_seed_data(spec: &BenchmarkSpec, seed: u64) -> Result<SeedData> {
    let mut rng = RngStream::new(spec.master_seed).substream(&format!("memory/seed{seed}"));
    let (latent_memory, latents) =
        make_synthetic_memory(spec.n_patterns, spec.dim, &mut rng, spec.min_separation)?;
    let latent_tau = default_tau(&latent_memory);
    let observed = match &spec.model {
        None => None,
        Some(model) => {
            let observations: Vec<Vector> = latents
                .iter()
                .map(|z| model.decode(z))
                .collect::<Result<_>>()?;
            let encoded: Vec<Vector> = observations
                .iter()
                .map(|x| model.encode_mean(x))
                .collect::<Result<_>>()?;
            let memory = MemoryMatrix::from_patterns(&encoded)?;
            let tau = default_tau(&memory);
            Some(ObservedData {
                observations,
                memory,
                tau,
            })
        }
    };
    Ok(SeedData {
        latents,
        latent_memory,
        latent_tau,
        observed,
    })
}

struct CellOutcome {
    success_pct: f64,
    iters_mean: f64,
    wall_ms: f64,
}

fn run_cell(
    spec: &BenchmarkSpec,
    engine: &EngineSetup,
    scenario: &Scenario,
    seed: u64,
    data: &SeedData,
) -> Result<CellOutcome> {
    let start = Instant::now();
    let mut rng = RngStream::new(spec.master_seed)
        .substream(&format!("queries/seed{seed}/{}", scenario.label()));
    let decoder_based = matches!(engine.kind, EngineKind::BpGmm | EngineKind::PcGmm);

    let mut successes = 0usize;
    let mut iters_total = 0usize;
    let count;
    match scenario.space {
        Space::Latent => {
            if decoder_based {
                return Err(Error::Config(format!(
                    "engine '{}' retrieves from observations; use an observation-space scenario",
                    engine.kind.label()
                )));
            }
            let memory = &data.latent_memory;
            count = data.latents.len();
            for (k, pattern) in data.latents.iter().enumerate() {
                let query = corrupt(pattern, scenario, &mut rng)?;
                let result = retrieve(
                    &query,
                    None,
                    memory,
                    &engine.prior,
                    engine.kind,
                    &spec.retrieval,
                )?;
                if judge_success(&result.z_final, k, memory, data.latent_tau)? {
                    successes += 1;
                }
                iters_total += result.iterations_used;
            }
        }
        Space::Observation => {
            let model = spec.model.as_ref().expect("validated");
            let observed = data.observed.as_ref().expect("validated");
            let memory = &observed.memory;
            count = observed.observations.len();
            for (k, x) in observed.observations.iter().enumerate() {
                let x_query = corrupt(x, scenario, &mut rng)?;
                let result = if decoder_based {
                    let config = RetrievalConfig {
                        init: InitMode::Encoder,
                        ..spec.retrieval.clone()
                    };
                    retrieve(
                        &x_query,
                        Some(model),
                        memory,
                        &engine.prior,
                        engine.kind,
                        &config,
                    )?
                } else {
                    let z_query = model.encode_mean(&x_query)?;
                    retrieve(
                        &z_query,
                        None,
                        memory,
                        &engine.prior,
                        engine.kind,
                        &spec.retrieval,
                    )?
                };
                if judge_success(&result.z_final, k, memory, observed.tau)? {
                    successes += 1;
                }
                iters_total += result.iterations_used;
            }
        }
    }
    Ok(CellOutcome {
        success_pct: 100.0 * successes as f64 / count as f64,
        iters_mean: iters_total as f64 / count as f64,
        wall_ms: start.elapsed().as_secs_f64() * 1000.0,
    })
}

/// Run the full (engine x scenario x seed) grid. Cells fan out over the
/// ambient rayon pool; results are reduced in fixed grid order.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkReport> {
    spec.validate()?;
    let seed_data: Vec<SeedData> = spec
        .seeds
        .iter()
        .map(|&s| build_seed_data(spec, s))
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for e in 0..spec.engines.len() {
        for s in 0..spec.scenarios.len() {
            for (i, &seed) in spec.seeds.iter().enumerate() {
                cells.push((e, s, i, seed));
            }
        }
    }
    let outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(|&(e, s, i, seed)| {
            run_cell(spec, &spec.engines[e], &spec.scenarios[s], seed, &seed_data[i])
        })
        .collect::<Result<_>>()?;

    let per_row = spec.seeds.len();
    let mut rows = Vec::new();
    for (e, engine) in spec.engines.iter().enumerate() {
        for (s, scenario) in spec.scenarios.iter().enumerate() {
            let base = (e * spec.scenarios.len() + s) * per_row;
            let slice = &outcomes[base..base + per_row];
            let mean = slice.iter().map(|c| c.success_pct).sum::<f64>() / per_row as f64;
            let var = slice
                .iter()
                .map(|c| (c.success_pct - mean) * (c.success_pct - mean))
                .sum::<f64>()
                / per_row as f64;
            let iters = slice.iter().map(|c| c.iters_mean).sum::<f64>() / per_row as f64;
            let wall: f64 = slice.iter().map(|c| c.wall_ms).sum();
            rows.push(BenchmarkRow {
                engine: engine.kind.label().to_string(),
                scenario: scenario.label(),
                seed_count: per_row,
                success_mean: mean,
                success_std: var.sqrt(),
                iters_mean: iters,
                wall_ms: wall.round() as u64,
            });
        }
    }
    Ok(BenchmarkReport { rows })
}

/// One capacity-sweep measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityRow {
    pub n_patterns: usize,
    pub success_mean: f64,
    pub success_std: f64,
}

/// Success percentage as a function of the store size, at fixed dimension
/// and scenario. Store sizes must be ascending; every stored pattern is
/// queried once per seed.
pub fn capacity_sweep(
    dim: usize,
    ns: &[usize],
    scenario: &Scenario,
    engine: &EngineSetup,
    seeds: &[u64],
    retrieval: &RetrievalConfig,
    master_seed: u64,
) -> Result<Vec<CapacityRow>> {
    if ns.is_empty() || seeds.is_empty() {
        return Err(Error::Config(
            "capacity sweep needs at least one store size and one seed".into(),
        ));
    }
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("store sizes must be strictly ascending".into()));
    }
    if scenario.space == Space::Observation
        || matches!(engine.kind, EngineKind::BpGmm | EngineKind::PcGmm)
    {
        return Err(Error::Config(
            "capacity sweeps run at the latent level".into(),
        ));
    }

    let mut cells = Vec::new();
    for (ni, &n) in ns.iter().enumerate() {
        for &seed in seeds {
            cells.push((ni, n, seed));
        }
    }
    let rates: Vec<f64> = cells
        .par_iter()
        .map(|&(_, n, seed)| -> Result<f64> {
            let mut mem_rng =
                RngStream::new(master_seed).substream(&format!("capacity/n{n}/seed{seed}"));
            let (memory, latents) = make_synthetic_memory(n, dim, &mut mem_rng, 1.0)?;
            let tau = default_tau(&memory);
            let mut rng = RngStream::new(master_seed).substream(&format!(
                "capacity-queries/n{n}/seed{seed}/{}",
                scenario.label()
            ));
            let mut successes = 0usize;
            for (k, pattern) in latents.iter().enumerate() {
                let query = corrupt(pattern, scenario, &mut rng)?;
                let result = retrieve(&query, None, &memory, &engine.prior, engine.kind, retrieval)?;
                if judge_success(&result.z_final, k, &memory, tau)? {
                    successes += 1;
                }
            }
            Ok(100.0 * successes as f64 / n as f64)
        })
        .collect::<Result<_>>()?;

    let per_row = seeds.len();
    let mut rows = Vec::new();
    for (ni, &n) in ns.iter().enumerate() {
        let slice = &rates[ni * per_row..(ni + 1) * per_row];
        let mean = slice.iter().sum::<f64>() / per_row as f64;
        let var = slice.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / per_row as f64;
        rows.push(CapacityRow {
            n_patterns: n,
            success_mean: mean,
            success_std: var.sqrt(),
        });
    }
    Ok(rows)
}

pub fn capacity_csv(rows: &[CapacityRow]) -> String {
    let mut out = String::from("n_patterns,success_mean,success_std\n");
    for row in rows {
        out.push_str(&format!(
            "{},{:.4},{:.4}\n",
            row.n_patterns, row.success_mean, row.success_std
        ));
    }
    out
}

/// Run `f` on a dedicated pool of `workers` threads (or the ambient pool
/// when `None`).
pub fn run_with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
