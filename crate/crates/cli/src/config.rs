use std::path::PathBuf;

use exchange_lattice_core::kernels::{AlphaKernel, KernelConfig, RateConfig};
use exchange_lattice_core::simulator::Model;
use exchange_lattice_core::spectral::stationary_dim;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n_sites: usize,
    pub epsilon: f64,
    pub kernel: KernelConfig,
    pub rate: RateConfig,
}

fn default_points() -> usize {
    40
}

fn default_inner_draws() -> usize {
    8
}

fn default_mode() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentSpec {
    /// Synchronous coupling from the two extreme states (all energy on the
    /// first site versus all on the last).
    Contraction {
        /// Defaults to the time at which the bound predicts a 100-fold drop.
        #[serde(default)]
        horizon: Option<f64>,
        replicas: usize,
        #[serde(default = "default_points")]
        n_points: usize,
    },
    GapScan {
        n_list: Vec<usize>,
        replicas: usize,
        horizon_per_n2: f64,
        #[serde(default = "default_points")]
        n_points: usize,
        rayleigh_samples: usize,
        #[serde(default = "default_inner_draws")]
        inner_alpha_draws: usize,
        #[serde(default = "default_mode")]
        fourier_mode: usize,
    },
    Stationarity {
        horizon: f64,
        replicas: usize,
        /// Law to test; defaults to the one the model is reversible for.
        #[serde(default)]
        dim_d: Option<f64>,
    },
    Reversibility {
        grid_size: usize,
    },
    Minorization {
        grid_size: usize,
    },
    Eigen {},
}

impl ExperimentSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Contraction { .. } => "contraction",
            Self::GapScan { .. } => "gap_scan",
            Self::Stationarity { .. } => "stationarity",
            Self::Reversibility { .. } => "reversibility",
            Self::Minorization { .. } => "minorization",
            Self::Eigen {} => "eigen",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub experiment: ExperimentSpec,
    pub seed: u64,
    pub output_dir: PathBuf,
}

/// A config that parsed and passed validation, with its built model.
#[derive(Debug)]
pub struct Validated {
    pub config: ExperimentConfig,
    pub model: Model,
    pub kernel: AlphaKernel,
    pub hash: String,
}

fn require(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    /// SHA-256 of the canonical JSON of everything that affects results
    /// (the output directory does not).
    pub fn hash(&self) -> String {
        let canonical = serde_json::json!({
            "model": self.model,
            "experiment": self.experiment,
            "seed": self.seed,
        });
        hex::encode(Sha256::digest(canonical.to_string().as_bytes()))
    }

    pub fn validate(self) -> Result<Validated, String> {
        let m = &self.model;
        require(m.n_sites >= 2, format!("model.n_sites must be >= 2, got {}", m.n_sites))?;
        require(m.epsilon.is_finite() && m.epsilon > 0.0, format!("model.epsilon must be > 0, got {}", m.epsilon))?;
        let kernel = m.kernel.build().map_err(|e| format!("model.kernel: {e}"))?;
        let rate = m.rate.build(&m.kernel).map_err(|e| format!("model.rate: {e}"))?;
        let model = Model::new(kernel.clone(), rate).map_err(|e| format!("model: {e}"))?;
        let positive = |v: f64| v.is_finite() && v > 0.0;

        match &self.experiment {
            ExperimentSpec::Contraction { horizon, replicas, n_points } => {
                require(
                    model.rate.constant_value().is_some() && model.kernel.state_independent(),
                    "contraction needs a constant rate and a state-independent kernel",
                )?;
                require(horizon.is_none_or(positive), "contraction.horizon must be > 0")?;
                require(*replicas >= 2 && *n_points >= 3, "contraction needs replicas >= 2 and n_points >= 3")?;
                require(
                    model.kernel.variance().is_ok_and(|v| v.value < 0.25),
                    "contraction needs a kernel variance below 1/4",
                )?;
            }
            ExperimentSpec::GapScan {
                n_list,
                replicas,
                horizon_per_n2,
                n_points,
                rayleigh_samples,
                inner_alpha_draws,
                fourier_mode,
            } => {
                require(
                    n_list.len() >= 3 && n_list.iter().all(|&n| n >= 2),
                    "gap_scan.n_list needs >= 3 sizes, each >= 2",
                )?;
                require(
                    stationary_dim(&model).is_some(),
                    "gap_scan needs a model with a known stationary product law",
                )?;
                require(positive(*horizon_per_n2), "gap_scan.horizon_per_n2 must be > 0")?;
                require(*replicas >= 10 && *n_points >= 4, "gap_scan needs replicas >= 10 and n_points >= 4")?;
                require(
                    *rayleigh_samples >= 10 && *inner_alpha_draws >= 1,
                    "gap_scan needs rayleigh_samples >= 10 and inner_alpha_draws >= 1",
                )?;
                require(*fourier_mode >= 1, "gap_scan.fourier_mode must be >= 1")?;
            }
            ExperimentSpec::Stationarity { horizon, replicas, dim_d } => {
                require(horizon.is_finite() && *horizon >= 0.0, "stationarity.horizon must be >= 0")?;
                require(*replicas >= 2, "stationarity.replicas must be >= 2")?;
                require(
                    dim_d.map_or(stationary_dim(&model).is_some(), positive),
                    "stationarity needs dim_d > 0 or a model with a known stationary product law",
                )?;
            }
            ExperimentSpec::Reversibility { grid_size } => {
                require(kernel.has_density(), "reversibility needs a kernel with a density")?;
                require(*grid_size >= 2, "reversibility.grid_size must be >= 2")?;
            }
            ExperimentSpec::Minorization { grid_size } => {
                require(kernel.has_density(), "minorization needs a kernel with a density")?;
                require(*grid_size >= 100, "minorization.grid_size must be >= 100")?;
            }
            ExperimentSpec::Eigen {} => {}
        }
        let hash = self.hash();
        Ok(Validated { config: self, model, kernel, hash })
    }
}
