//! JSON configuration: one file drives every subcommand. Unknown keys are
//! rejected; every default is materialized, and each command echoes the
//! fully resolved config next to its outputs so any result can be reproduced
//! from one file.

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    /// Master seed; every random choice derives from it.
    pub seed: u64,
    /// Worker-thread cap for grid fan-out; absent = available parallelism.
    pub workers: Option<usize>,
    pub model: ModelSection,
    pub memory: MemorySection,
    pub prior: PriorSection,
    /// Engine used by `retrieve`: one of mchn, gmm, gmm_smooth, precision,
    /// bp_gmm, pc_gmm.
    pub engine: String,
    pub retrieval: RetrievalSection,
    pub benchmark: BenchmarkSection,
    pub capacity: CapacitySection,
    pub landscape: LandscapeSection,
    pub precision_training: PrecisionSection,
    pub generate: GenerateSection,
    pub output: OutputSection,
}

impl Default for CliConfig {
    fn default() -> Self {
        CliConfig {
            seed: 42,
            workers: None,
            model: ModelSection::default(),
            memory: MemorySection::default(),
            prior: PriorSection::default(),
            engine: "gmm".into(),
            retrieval: RetrievalSection::default(),
            benchmark: BenchmarkSection::default(),
            capacity: CapacitySection::default(),
            landscape: LandscapeSection::default(),
            precision_training: PrecisionSection::default(),
            generate: GenerateSection::default(),
            output: OutputSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub latent_dim: usize,
    /// Hidden widths of the decoder (the encoder mirrors them).
    pub hidden: Vec<usize>,
    pub obs_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Size of the bundled synthetic training set.
    pub dataset_size: usize,
    /// Load a trained model from here instead of `<out>/model/vae.txt`.
    pub path: Option<String>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            latent_dim: 8,
            hidden: vec![32],
            obs_dim: 16,
            epochs: 100,
            learning_rate: 0.002,
            dataset_size: 128,
            path: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemorySection {
    /// Load a memory from here instead of `<out>/memory/memory.txt`.
    pub path: Option<String>,
    pub synth: SynthSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub n_patterns: usize,
    pub dim: usize,
    pub min_separation: f64,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            n_patterns: 100,
            dim: 16,
            min_separation: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    /// balanced_gmm | mchn | precision_gmm
    pub kind: String,
    pub sigma: f64,
    pub beta: f64,
    /// Trained diagonal precision (required for kind = precision_gmm).
    pub precision_path: Option<String>,
}

impl Default for PriorSection {
    fn default() -> Self {
        PriorSection {
            kind: "balanced_gmm".into(),
            sigma: recall_core::harness::DEFAULT_SIGMA,
            beta: recall_core::harness::DEFAULT_BETA,
            precision_path: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalSection {
    pub max_iters: usize,
    pub step: f64,
    pub prior_weight: f64,
    pub tol: f64,
    /// query | encoder
    pub init: String,
}

impl Default for RetrievalSection {
    fn default() -> Self {
        RetrievalSection {
            max_iters: 200,
            step: 0.05,
            prior_weight: 2.0,
            tol: 1e-7,
            init: "query".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSection {
    pub engines: Vec<String>,
    pub scenarios: Vec<ScenarioSection>,
    pub seeds: usize,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        BenchmarkSection {
            engines: vec!["gmm".into(), "mchn".into()],
            scenarios: vec![
                ScenarioSection::named("clean"),
                ScenarioSection::noise(0.2),
                ScenarioSection::noise(0.6),
                ScenarioSection::mask(0.25),
                ScenarioSection::mask(0.56),
            ],
            seeds: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    /// clean | noise | mask | subspace
    pub kind: String,
    pub std: f64,
    pub fraction: f64,
    pub dims: Vec<usize>,
    /// latent | observation
    pub space: String,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            kind: "clean".into(),
            std: 0.2,
            fraction: 0.25,
            dims: vec![],
            space: "latent".into(),
        }
    }
}

impl ScenarioSection {
    fn named(kind: &str) -> Self {
        ScenarioSection {
            kind: kind.into(),
            ..ScenarioSection::default()
        }
    }

    fn noise(std: f64) -> Self {
        ScenarioSection {
            kind: "noise".into(),
            std,
            ..ScenarioSection::default()
        }
    }

    fn mask(fraction: f64) -> Self {
        ScenarioSection {
            kind: "mask".into(),
            fraction,
            ..ScenarioSection::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CapacitySection {
    pub ns: Vec<usize>,
    pub noise_std: f64,
    pub dim: usize,
    pub seeds: usize,
}

impl Default for CapacitySection {
    fn default() -> Self {
        CapacitySection {
            ns: vec![5, 20, 100, 500, 2000],
            noise_std: 0.6,
            dim: 16,
            seeds: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeSection {
    /// balanced | mchn
    pub prior: String,
    pub sigma: f64,
    pub beta: f64,
    pub bounds: [f64; 2],
    pub resolution: usize,
    /// "dominated" for the built-in four-pattern plane construction, or a
    /// path to a 2-D memory file.
    pub memory: String,
}

impl Default for LandscapeSection {
    fn default() -> Self {
        LandscapeSection {
            prior: "balanced".into(),
            sigma: 0.2,
            beta: 100.0,
            bounds: [-3.0, 3.0],
            resolution: 400,
            memory: "dominated".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrecisionSection {
    pub n_patterns: usize,
    pub dim: usize,
    pub min_separation: f64,
    /// Latent dimensions the task corrupts.
    pub dims: Vec<usize>,
    pub noise_std: f64,
    pub examples_per_pattern: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Readout iterations the training gradient flows through.
    pub unroll: usize,
    pub sigma_init: f64,
}

impl Default for PrecisionSection {
    fn default() -> Self {
        PrecisionSection {
            n_patterns: 12,
            dim: 8,
            min_separation: 1.0,
            dims: vec![0, 1, 2, 3],
            noise_std: 2.0,
            examples_per_pattern: 4,
            epochs: 300,
            learning_rate: 0.05,
            unroll: 3,
            sigma_init: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateSection {
    pub count: usize,
    pub sigma: f64,
}

impl Default for GenerateSection {
    fn default() -> Self {
        GenerateSection {
            count: 8,
            sigma: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            directory: "out".into(),
        }
    }
}

impl CliConfig {
    pub fn load(path: &str) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config '{path}': {e}")))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("bad config '{path}': {e}")))
    }

    /// Fully resolved config as pretty JSON.
    pub fn echo_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
