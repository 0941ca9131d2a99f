use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::IntegratorConfig;
use crate::hamiltonians::{HamiltonianKind, HamiltonianSpec, InitialData};
use crate::neural::{AdamConfig, TrainConfig};

/// The Hamiltonian, initial data and integrator shared by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub hamiltonian: HamiltonianSpec,
    #[serde(default = "InitialData::sine")]
    pub initial: InitialData,
    #[serde(default = "default_integrator")]
    pub integrator: IntegratorConfig,
}

fn default_integrator() -> IntegratorConfig {
    IntegratorConfig::new(1e-2, 0.0)
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            hamiltonian: HamiltonianSpec::free_particle(1),
            initial: InitialData::sine(),
            integrator: default_integrator(),
        }
    }
}

impl ProblemConfig {
    pub fn validate(&self) -> Result<()> {
        self.hamiltonian.validate()?;
        self.initial.validate()?;
        self.integrator.validate()?;
        if self.hamiltonian.d != self.initial.d {
            return Err(Error::Config(format!(
                "hamiltonian has d = {}, initial data has d = {}",
                self.hamiltonian.d, self.initial.d
            )));
        }
        Ok(())
    }

    /// Constant velocity `v` when the Hamiltonian is `H = v·p` with
    /// `q`-independent `v`.
    pub fn constant_velocity(&self) -> Option<Vec<f64>> {
        let h = &self.hamiltonian;
        if h.kind != HamiltonianKind::Advection {
            return None;
        }
        h.velocity_coeffs
            .iter()
            .map(|terms| {
                terms
                    .iter()
                    .try_fold(0.0, |acc, t| t.k.iter().all(|k| *k == 0).then_some(acc + t.cos_amp))
            })
            .collect()
    }
}

/// Reference solution used to score the reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Truth {
    /// Method-of-characteristics oracle.
    #[default]
    Oracle,
    /// `u(q, t) = u0(q − v t)`; constant-velocity advection only.
    Transport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceConfig {
    pub t: f64,
    /// Defaults to the initial data's `regularity_r`.
    pub r: Option<u32>,
    pub grids: Vec<usize>,
    pub gamma: Option<f64>,
    /// Probes per axis as a multiple of the grid resolution.
    pub probe_factor: usize,
    pub truth: Truth,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            t: 0.3,
            r: None,
            grids: vec![16, 32, 64, 128],
            gamma: None,
            probe_factor: 8,
            truth: Truth::Oracle,
        }
    }
}

/// Flow-map training set and optimizer budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateTraining {
    pub n_samples: usize,
    /// Held-out samples for the surrogate sup error.
    pub test_samples: usize,
    pub sampling_box: f64,
    pub train: TrainConfig,
}

impl Default for SurrogateTraining {
    fn default() -> Self {
        SurrogateTraining {
            n_samples: 4000,
            test_samples: 1000,
            sampling_box: 1.0,
            train: TrainConfig {
                epochs: 300,
                adam: AdamConfig {
                    step_size: 1e-2,
                    ..AdamConfig::default()
                },
                step_decay: 0.99,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SizeSweepConfig {
    pub t: f64,
    pub widths: Vec<usize>,
    /// Hidden layers per network, all of the same width.
    pub depth: usize,
    pub grid_per_axis: usize,
    pub r: Option<u32>,
    pub probe_factor: usize,
    pub training: SurrogateTraining,
}

impl Default for SizeSweepConfig {
    fn default() -> Self {
        SizeSweepConfig {
            t: 0.5,
            widths: vec![8, 16, 32, 64],
            depth: 2,
            grid_per_axis: 64,
            r: None,
            probe_factor: 8,
            training: SurrogateTraining::default(),
        }
    }
}

/// Random trigonometric initial data `Σ_k a_k cos kq + b_k sin kq` with
/// `a_k, b_k ~ U(−α/k², α/k²)`, `d = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FamilyConfig {
    pub modes: usize,
    pub amplitude: f64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            modes: 2,
            amplitude: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub t: f64,
    pub family: FamilyConfig,
    /// Encoding points `N`; the direct network reads `u0` here.
    pub grid_per_axis: usize,
    /// Output points of the direct network, also the scoring probes.
    pub probes_per_axis: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Hidden widths of the flow surrogate; the direct network is matched to
    /// each one by parameter count. A width of 0 adds the bias-only row.
    pub widths: Vec<usize>,
    pub r: Option<u32>,
    pub direct_train: TrainConfig,
    pub surrogate: SurrogateTraining,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        let mut surrogate = SurrogateTraining {
            sampling_box: 1.5,
            ..SurrogateTraining::default()
        };
        surrogate.train.epochs = 100;
        BaselineConfig {
            t: 0.3,
            family: FamilyConfig::default(),
            grid_per_axis: 32,
            probes_per_axis: 32,
            n_train: 256,
            n_test: 32,
            widths: vec![0, 16, 32, 64],
            r: None,
            direct_train: TrainConfig {
                epochs: 300,
                batch_size: 16,
                adam: AdamConfig {
                    step_size: 2e-3,
                    ..AdamConfig::default()
                },
                ..TrainConfig::default()
            },
            surrogate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TstarConfig {
    pub t_max: f64,
    pub n_times: usize,
    pub probes_per_axis: usize,
}

impl Default for TstarConfig {
    fn default() -> Self {
        TstarConfig {
            t_max: 1.5,
            n_times: 61,
            probes_per_axis: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainCommandConfig {
    pub t: f64,
    pub hidden: Vec<usize>,
    pub training: SurrogateTraining,
}

impl Default for TrainCommandConfig {
    fn default() -> Self {
        TrainCommandConfig {
            t: 0.5,
            hidden: vec![64, 64],
            training: SurrogateTraining::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveConfig {
    pub t: f64,
    pub grid_per_axis: usize,
    pub r: Option<u32>,
    pub gamma: Option<f64>,
    /// Trained surrogate (JSON); the exact flow is used when absent. Relative
    /// paths resolve against the config file's directory.
    pub model: Option<PathBuf>,
    pub probes_per_axis: usize,
    /// Adds oracle values and pointwise errors to the output.
    pub compare_oracle: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            t: 0.3,
            grid_per_axis: 64,
            r: None,
            gamma: None,
            model: None,
            probes_per_axis: 256,
            compare_oracle: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub t: f64,
    pub probes_per_axis: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            t: 0.3,
            probes_per_axis: 128,
        }
    }
}

/// One configuration file for every command; each command reads its own
/// section and falls back to defaults when it is absent.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub convergence: ConvergenceConfig,
    #[serde(default)]
    pub size_sweep: SizeSweepConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
    #[serde(default)]
    pub tstar: TstarConfig,
    #[serde(default)]
    pub train: TrainCommandConfig,
    #[serde(default)]
    pub solve: SolveConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// A configuration together with the directory its relative paths resolve
/// against.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

/// Reads a TOML config, or the JSON manifest of an earlier run (whose
/// embedded config and seed are reused verbatim).
pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)?;
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    let config = if is_json {
        let manifest: super::report::Manifest = serde_json::from_str(&text)?;
        let mut config = manifest.config;
        config.seed = manifest.seed;
        config
    } else {
        RunConfig::from_toml(&text)?
    };
    config.problem.validate()?;
    Ok(LoadedConfig { config, base_dir })
}
