//! The eight subcommands. Each validates everything it needs before writing
//! a single byte, echoes the effective config next to its outputs, and
//! returns a JSON summary for stdout.

use std::fs;
use std::path::{Path, PathBuf};

use recall_core::engines::{retrieve, EngineKind, InitMode, RetrievalConfig};
use recall_core::harness::{
    aligned_dominated_memory, capacity_csv, capacity_sweep, energy_landscape, one_shot_generate,
    run_benchmark, run_with_workers, synthetic_observations, BenchmarkSpec, Corruption,
    EngineSetup, LandscapePrior, Scenario, Space,
};
use recall_core::memory::{MemoryMatrix, PriorSpec};
use recall_core::model::{format_f64, load_vae, save_vae, train_vae, VaeModel};
use recall_core::numerics::{RngStream, Vector};
use recall_core::precision::{
    masked_nearest_success_rate, subspace_noise_task, task_success_rate, train_precision,
    PrecisionParams,
};

use crate::config::{CliConfig, ScenarioSection};
use crate::{CliError, Invocation};

struct OutputDirs {
    root: PathBuf,
}

impl OutputDirs {
    fn new(config: &CliConfig) -> Self {
        OutputDirs {
            root: PathBuf::from(&config.output.directory),
        }
    }

    fn path(&self, sub: &str, file: &str) -> PathBuf {
        self.root.join(sub).join(file)
    }

    fn write(&self, sub: &str, file: &str, contents: &str) -> Result<PathBuf, CliError> {
        let dir = self.root.join(sub);
        fs::create_dir_all(&dir)
            .map_err(|e| CliError::Config(format!("cannot create '{}': {e}", dir.display())))?;
        let path = dir.join(file);
        fs::write(&path, contents)
            .map_err(|e| CliError::Config(format!("cannot write '{}': {e}", path.display())))?;
        Ok(path)
    }

    fn write_root(&self, file: &str, contents: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.root)
            .map_err(|e| CliError::Config(format!("cannot create '{}': {e}", self.root.display())))?;
        let path = self.root.join(file);
        fs::write(&path, contents)
            .map_err(|e| CliError::Config(format!("cannot write '{}': {e}", path.display())))?;
        Ok(path)
    }
}

fn echo_config(dirs: &OutputDirs, command: &str, config: &CliConfig) -> Result<(), CliError> {
    dirs.write_root(&format!("{command}_config.json"), &config.echo_json())?;
    Ok(())
}

fn master_rng(config: &CliConfig) -> RngStream {
    RngStream::new(config.seed)
}

fn retrieval_config(config: &CliConfig) -> Result<RetrievalConfig, CliError> {
    let init = match config.retrieval.init.as_str() {
        "query" => InitMode::QueryAsZ,
        "encoder" => InitMode::Encoder,
        other => {
            return Err(CliError::Config(format!(
                "retrieval.init must be 'query' or 'encoder', got '{other}'"
            )))
        }
    };
    Ok(RetrievalConfig {
        max_iters: config.retrieval.max_iters,
        step_size: config.retrieval.step,
        prior_weight: config.retrieval.prior_weight,
        tol: config.retrieval.tol,
        init,
        log_trajectory: false,
        log_energies: true,
    })
}

fn load_model_file(path: &Path) -> Result<VaeModel, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read model '{}': {e}", path.display())))?;
    Ok(load_vae(&text)?)
}

/// The model for commands that need one: explicit `model.path` first, then
/// the default artifact produced by `train-vae`.
fn resolve_model(config: &CliConfig, dirs: &OutputDirs) -> Result<VaeModel, CliError> {
    let path = match &config.model.path {
        Some(p) => PathBuf::from(p),
        None => dirs.path("model", "vae.txt"),
    };
    if !path.exists() {
        return Err(CliError::Config(format!(
            "no trained model at '{}'; run `recall train-vae` first or set model.path",
            path.display()
        )));
    }
    load_model_file(&path)
}

fn resolve_memory(config: &CliConfig, dirs: &OutputDirs) -> Result<MemoryMatrix, CliError> {
    let path = match &config.memory.path {
        Some(p) => PathBuf::from(p),
        None => dirs.path("memory", "memory.txt"),
    };
    if !path.exists() {
        return Err(CliError::Config(format!(
            "no memory at '{}'; run `recall store` first or set memory.path",
            path.display()
        )));
    }
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read memory '{}': {e}", path.display())))?;
    Ok(MemoryMatrix::load(&text)?)
}

fn prior_from_config(config: &CliConfig) -> Result<PriorSpec, CliError> {
    match config.prior.kind.as_str() {
        "balanced_gmm" => Ok(PriorSpec::balanced(config.prior.sigma)?),
        "mchn" => Ok(PriorSpec::mchn(config.prior.beta)?),
        "precision_gmm" => {
            let path = config.prior.precision_path.as_ref().ok_or_else(|| {
                CliError::Config(
                    "prior.kind = precision_gmm needs prior.precision_path; \
                     run `recall train-precision` first"
                        .into(),
                )
            })?;
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read precision '{path}': {e}"))
            })?;
            let params = PrecisionParams::load(&text)?;
            Ok(PriorSpec::precision(params.precision()))
        }
        other => Err(CliError::Config(format!(
            "unknown prior kind '{other}' (balanced_gmm | mchn | precision_gmm)"
        ))),
    }
}

/// Per-engine prior for benchmark grids: attention engines read their own
/// scale parameter from the prior section.
fn engine_setup(name: &str, config: &CliConfig) -> Result<EngineSetup, CliError> {
    let kind = EngineKind::parse(name)?;
    let prior = match kind {
        EngineKind::Mchn => PriorSpec::mchn(config.prior.beta)?,
        EngineKind::Precision => {
            let path = config.prior.precision_path.as_ref().ok_or_else(|| {
                CliError::Config(
                    "the precision engine needs prior.precision_path; \
                     run `recall train-precision` first"
                        .into(),
                )
            })?;
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read precision '{path}': {e}"))
            })?;
            PriorSpec::precision(PrecisionParams::load(&text)?.precision())
        }
        _ => PriorSpec::balanced(config.prior.sigma)?,
    };
    Ok(EngineSetup { kind, prior })
}

fn scenario_from_section(section: &ScenarioSection) -> Result<Scenario, CliError> {
    let corruption = match section.kind.as_str() {
        "clean" => Corruption::Clean,
        "noise" => Corruption::GaussianNoise { std: section.std },
        "mask" => Corruption::Mask {
            fraction: section.fraction,
        },
        "subspace" => Corruption::SubspaceNoise {
            dims: section.dims.clone(),
            std: section.std,
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown scenario kind '{other}' (clean | noise | mask | subspace)"
            )))
        }
    };
    let space = match section.space.as_str() {
        "latent" => Space::Latent,
        "observation" => Space::Observation,
        other => {
            return Err(CliError::Config(format!(
                "unknown scenario space '{other}' (latent | observation)"
            )))
        }
    };
    Ok(Scenario { corruption, space })
}

fn parse_vector_line(line: &str, line_no: usize) -> Result<Vector, CliError> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| CliError::Config(format!("line {line_no}: bad float '{tok}'")))
        })
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(CliError::Config(format!("line {line_no}: empty vector")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Config(format!(
            "line {line_no}: non-finite value"
        )));
    }
    Ok(Vector::new(values))
}

fn vector_line(v: &Vector) -> String {
    let fields: Vec<String> = v.iter().map(|&x| format_f64(x)).collect();
    fields.join(" ")
}

pub fn cmd_train_vae(inv: &Invocation) -> Result<String, CliError> {
    let config = &inv.config;
    let dirs = OutputDirs::new(config);
    let rng = master_rng(config);
    let dataset = synthetic_observations(
        config.model.dataset_size,
        config.model.obs_dim,
        config.model.latent_dim,
        &mut rng.substream("dataset"),
    )?;
    let init = VaeModel::random(
        config.model.obs_dim,
        &config.model.hidden,
        config.model.latent_dim,
        &mut rng.substream("init"),
    )?;
    let (trained, losses) = train_vae(
        &init,
        &dataset,
        config.model.epochs,
        config.model.learning_rate,
        &mut rng.substream("train"),
    )?;

    echo_config(&dirs, "train-vae", config)?;
    let model_path = dirs.write("model", "vae.txt", &save_vae(&trained))?;
    let mut trace = String::from("epoch,loss\n");
    for (epoch, loss) in losses.iter().enumerate() {
        trace.push_str(&format!("{epoch},{loss:.10e}\n"));
    }
    let trace_path = dirs.write("model", "vae_loss.csv", &trace)?;

    Ok(serde_json::to_string_pretty(&serde_json::json!({
        "model_path": model_path.display().to_string(),
        "loss_trace_path": trace_path.display().to_string(),
        "epochs": config.model.epochs,
        "final_loss": losses.last().copied(),
    }))
    .expect("json"))
}

pub fn cmd_store(inv: &Invocation) -> Result<String, CliError> {
    let config = &inv.config;
    let dirs = OutputDirs::new(config);
    let inputs_path = inv
        .inputs
        .as_ref()
        .ok_or_else(|| CliError::Usage("store needs --inputs <path>".into()))?;
    let text = fs::read_to_string(inputs_path)
        .map_err(|e| CliError::Config(format!("cannot read inputs '{inputs_path}': {e}")))?;
    let vectors: Vec<Vector> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_vector_line(l, i + 1))
        .collect::<Result<_, _>>()?;
    if vectors.is_empty() {
        return Err(CliError::Config("inputs file holds no vectors".into()));
    }

    // Existing memory (from memory.path) continues to grow; otherwise start
    // empty at the latent dimension.
    let mut memory = match &config.memory.path {
        Some(p) if Path::new(p).exists() => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("cannot read memory '{p}': {e}")))?;
            MemoryMatrix::load(&text)?
        }
        _ => MemoryMatrix::empty(config.model.latent_dim),
    };

    // Latent-dimension inputs pass through; observation-dimension inputs go
    // through the encoder.
    let needs_model = vectors.iter().any(|v| v.dim() != memory.dim());
    let model = if needs_model {
        Some(resolve_model(config, &dirs)?)
    } else {
        None
    };
    let mut stored = Vec::with_capacity(vectors.len());
    for (i, v) in vectors.iter().enumerate() {
        if v.dim() == memory.dim() {
            stored.push(v.clone());
        } else {
            let model = model.as_ref().expect("resolved above");
            if v.dim() != model.obs_dim() {
                return Err(CliError::Config(format!(
                    "line {}: vector has dimension {}, expected latent {} or observation {}",
                    i + 1,
                    v.dim(),
                    memory.dim(),
                    model.obs_dim()
                )));
            }
            stored.push(model.encode_mean(v)?);
        }
    }
    for v in &stored {
        memory = memory.write_pattern(v)?;
    }

    echo_config(&dirs, "store", config)?;
    let path = dirs.write("memory", "memory.txt", &memory.save())?;
    Ok(serde_json::to_string_pretty(&serde_json::json!({
        "memory_path": path.display().to_string(),
        "stored": stored.len(),
        "total_patterns": memory.len(),
        "dim": memory.dim(),
    }))
    .expect("json"))
}

pub fn cmd_retrieve(inv: &Invocation) -> Result<String, CliError> {
    let config = &inv.config;
    let dirs = OutputDirs::new(config);
    let query_path = inv
        .query
        .as_ref()
        .ok_or_else(|| CliError::Usage("retrieve needs --query <path>".into()))?;
    let text = fs::read_to_string(query_path)
        .map_err(|e| CliError::Config(format!("cannot read query '{query_path}': {e}")))?;
    let line = text
        .lines()
        .find(|l| !l.trim().is_empty())
        .ok_or_else(|| CliError::Config("query file holds no vector".into()))?;
    let query = parse_vector_line(line, 1)?;

    let memory = resolve_memory(config, &dirs)?;
    let engine = EngineKind::parse(&config.engine)?;
    let prior = prior_from_config(config)?;
    let mut retrieval = retrieval_config(config)?;
    let needs_model = matches!(engine, EngineKind::BpGmm | EngineKind::PcGmm)
        || retrieval.init == InitMode::Encoder
        || query.dim() != memory.dim();
    let model = if needs_model {
        let m = resolve_model(config, &dirs)?;
        if query.dim() == m.obs_dim() && retrieval.init == InitMode::QueryAsZ {
            retrieval.init = InitMode::Encoder;
        }
        Some(m)
    } else {
        None
    };

    let result = retrieve(&query, model.as_ref(), &memory, &prior, engine, &retrieval)?;

    echo_config(&dirs, "retrieve", config)?;
    let mut energies = String::from("step,energy\n");
    for (i, e) in result.energies.iter().enumerate() {
        energies.push_str(&format!("{i},{e:.10e}\n"));
    }
    let energies_path = dirs.write("reports", "retrieve_energies.csv", &energies)?;
    Ok(serde_json::to_string_pretty(&serde_json::json!({
        // stored patterns are numbered from 1 in reports
        "matched_index": result.matched_index + 1,
        "matched_distance": result.matched_distance,
        "iterations": result.iterations_used,
        "energies_path": energies_path.display().to_string(),
    }))
    .expect("json"))
}

fn benchmark_spec(config: &CliConfig, dirs: &OutputDirs) -> Result<BenchmarkSpec, CliError> {
    let engines: Vec<EngineSetup> = config
        .benchmark
        .engines
        .iter()
        .map(|name| engine_setup(name, config))
        .collect::<Result<_, _>>()?;
    let scenarios: Vec<Scenario> = config
        .benchmark
        .scenarios
        .iter()
        .map(scenario_from_section)
        .collect::<Result<_, _>>()?;
    let needs_model = engines
        .iter()
        .any(|e| matches!(e.kind, EngineKind::BpGmm | EngineKind::PcGmm))
        || scenarios.iter().any(|s| s.space == Space::Observation);
    let model = if needs_model {
        Some(resolve_model(config, dirs)?)
    } else {
        None
    };
    let mut retrieval = retrieval_config(config)?;
    retrieval.log_energies = false;
    Ok(BenchmarkSpec {
        dim: match &model {
            Some(m) => m.latent_dim(),
            None => config.memory.synth.dim,
        },
        n_patterns: config.memory.synth.n_patterns,
        min_separation: config.memory.synth.min_separation,
        engines,
        scenarios,
        seeds: (0..config.benchmark.seeds as u64).collect(),
        retrieval,
        master_seed: config.seed,
        model,
    })
}

pub fn cmd_benchmark(inv: &Invocation) -> Result<String, CliError> {
    let config = &inv.config;
    let dirs = OutputDirs::new(config);
    let spec = benchmark_spec(config, &dirs)?;
    let report = run_with_workers(config.workers, || run_benchmark(&spec))??;

    echo_config(&dirs, "benchmark", config)?;
    let csv_path = dirs.write("reports", "benchmark.csv", &report.to_csv())?;
    let json_path = dirs.write("reports", "benchmark.json", &report.to_json())?;
    Ok(serde_json::to_string_pretty(&serde_json::json!({
        "csv_path": csv_path.display().to_string(),
        "json_path": json_path.display().to_string(),
        "rows": report.rows.len(),
    }))
    .expect("json"))
}

pub fn cmd_capacity(inv: &Invocation) -> Result<String, CliError> {
    let config = &inv.config;
    let dirs = OutputDirs::new(config);
    let engine = engine_setup(&config.engine, config)?;
    let scenario = Scenario::latent(Corruption::GaussianNoise {
        std: config.capacity.noise_std,
    });
    let mut retrieval = retrieval_config(config)?;
    retrieval.log_energies = false;
    let seeds: Vec<u64> = (0..config.capacity.seeds as u64).collect();
    let rows = run_with_workers(config.workers, || {
        capacity_sweep(
            config.capacity.dim,
            &config.capacity.ns,
            &scenario,
            &engine,
            &seeds,
            &retrieval,
            config.seed,
        )
    })??;

    echo_config(&dirs, "capacity", config)?;
    let path = dirs.write("reports", "capacity.csv", &capacity_csv(&rows))?;
    Ok(serde_json::to_string_pretty(&serde_json::json!({
        "csv_path": path.display().to_string(),
        "rows": rows.len(),
    }))
    .expect("json"))
}

pub fn cmd_landscape(inv: &Invocation) -> Result<String, CliError> {
    let config = &inv.config;
    let dirs = OutputDirs::new(config);
    let memory = match config.landscape.memory.as_str() {
        "dominated" => aligned_dominated_memory(),
        path => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read memory '{path}': {e}")))?;
            MemoryMatrix::load(&text)?
        }
    };
    let prior = match config.landscape.prior.as_str() {
        "balanced" => LandscapePrior::Balanced {
            sigma: config.landscape.sigma,
        },
        "mchn" => LandscapePrior::Mchn {
            beta: config.landscape.beta,
        },
        other => {
            return Err(CliError::Config(format!(
                "unknown landscape prior '{other}' (balanced | mchn)"
            )))
        }
    };
    let grid = energy_landscape(
        &memory,
        prior,
        (config.landscape.bounds[0], config.landscape.bounds[1]),
        config.landscape.resolution,
    )?;

    echo_config(&dirs, "landscape", config)?;
    let label = prior.label();
    let grid_path = dirs.write("landscapes", &format!("landscape_{label}.csv"), &grid.to_csv())?;
    let minima_path = dirs.write(
        "landscapes",
        &format!("landscape_{label}_minima.csv"),
        &grid.minima_csv(),
    )?;
    Ok(serde_json::to_string_pretty(&serde_json::json!({
        "grid_path": grid_path.display().to_string(),
        "minima_path": minima_path.display().to_string(),
        "minima": grid.minima,
    }))
    .expect("json"))
}

pub fn cmd_train_precision(inv: &Invocation) -> Result<String, CliError> {
    let config = &inv.config;
    let dirs = OutputDirs::new(config);
    let section = &config.precision_training;
    let rng = master_rng(config);
    let (memory, _) = recall_core::harness::make_synthetic_memory(
        section.n_patterns,
        section.dim,
        &mut rng.substream("precision-memory"),
        section.min_separation,
    )?;
    let task = subspace_noise_task(
        &memory,
        &section.dims,
        section.noise_std,
        section.examples_per_pattern,
        &mut rng.substream("precision-task"),
    )?;
    let init = PrecisionParams::uniform(section.dim, section.sigma_init)?;
    let (trained, losses) = train_precision(
        &task,
        &init,
        section.epochs,
        section.learning_rate,
        section.unroll,
    )?;

    let tau = recall_core::harness::default_tau(&memory);
    let before = task_success_rate(&init, &task, section.unroll, tau)?;
    let after = task_success_rate(&trained, &task, section.unroll, tau)?;
    let oracle = masked_nearest_success_rate(&task)?;
    let p = trained.values();
    let corrupted_mean = section.dims.iter().map(|&j| p[j]).sum::<f64>() / section.dims.len() as f64;
    let clean_dims: Vec<usize> = (0..section.dim)
        .filter(|j| !section.dims.contains(j))
        .collect();
    let clean_mean = clean_dims.iter().map(|&j| p[j]).sum::<f64>() / clean_dims.len() as f64;

    echo_config(&dirs, "train-precision", config)?;
    let params_path = dirs.write("model", "precision.txt", &trained.save())?;
    let mut trace = String::from("epoch,loss\n");
    for (epoch, loss) in losses.iter().enumerate() {
        trace.push_str(&format!("{epoch},{loss:.10e}\n"));
    }
    let trace_path = dirs.write("model", "precision_loss.csv", &trace)?;
    Ok(serde_json::to_string_pretty(&serde_json::json!({
        "precision_path": params_path.display().to_string(),
        "loss_trace_path": trace_path.display().to_string(),
        "mean_precision_corrupted_dims": corrupted_mean,
        "mean_precision_clean_dims": clean_mean,
        "success_before": before,
        "success_after": after,
        "masked_nearest_oracle": oracle,
    }))
    .expect("json"))
}

pub fn cmd_generate(inv: &Invocation) -> Result<String, CliError> {
    let config = &inv.config;
    let dirs = OutputDirs::new(config);
    let model = resolve_model(config, &dirs)?;
    let memory = resolve_memory(config, &dirs)?;
    let rng = master_rng(config);
    let samples = one_shot_generate(
        &model,
        &memory,
        config.generate.sigma,
        config.generate.count,
        &mut rng.substream("generate"),
    )?;

    echo_config(&dirs, "generate", config)?;
    let mut text = String::new();
    for s in &samples {
        text.push_str(&vector_line(s));
        text.push('\n');
    }
    let path = dirs.write("reports", "generated.txt", &text)?;
    Ok(serde_json::to_string_pretty(&serde_json::json!({
        "samples_path": path.display().to_string(),
        "count": samples.len(),
    }))
    .expect("json"))
}
