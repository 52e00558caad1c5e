//! Experiment configuration files (TOML, strict: unknown keys are rejected).

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::network::ExchangeSimConfig;
use crate::scheduler::{validate_epsilon, Method};
use crate::state_space::RowDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SingleStepSchedule,
    MultiStepKalman,
    CurvatureStudy,
    Theorem2Study,
    NetworkBalance,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::SingleStepSchedule => "single_step_schedule",
            ExperimentKind::MultiStepKalman => "multi_step_kalman",
            ExperimentKind::CurvatureStudy => "curvature_study",
            ExperimentKind::Theorem2Study => "theorem2_study",
            ExperimentKind::NetworkBalance => "network_balance",
        }
    }
}

/// A square matrix given by shape keyword or explicitly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SquareSpec {
    Identity,
    ScaledIdentity { scale: f64 },
    Diagonal { values: Vec<f64> },
    Explicit { rows: Vec<Vec<f64>> },
}

/// Measurement matrices: one explicit matrix, one per step, or randomly generated per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasurementSpec {
    Explicit { rows: Vec<Vec<f64>> },
    PerStep { steps: Vec<Vec<Vec<f64>>> },
    Gaussian { sigma_h: f64 },
    Sphere { sigma_h: f64 },
}

impl MeasurementSpec {
    pub fn distribution(&self) -> Option<RowDistribution> {
        match *self {
            MeasurementSpec::Gaussian { sigma_h } => Some(RowDistribution::Gaussian { sigma_h }),
            MeasurementSpec::Sphere { sigma_h } => Some(RowDistribution::Sphere { sigma_h }),
            _ => None,
        }
    }
}

fn default_sigma_x() -> SquareSpec {
    SquareSpec::Identity
}

fn default_dynamics() -> SquareSpec {
    SquareSpec::Identity
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// State dimension.
    pub m: usize,
    /// Number of sensors.
    pub n: usize,
    pub sigma: f64,
    #[serde(default = "default_sigma_x")]
    pub sigma_x: SquareSpec,
    #[serde(default = "default_dynamics")]
    pub dynamics: SquareSpec,
    pub measurements: MeasurementSpec,
}

fn default_methods() -> Vec<Method> {
    vec![Method::ClassicGreedy, Method::RandomizedGreedy, Method::RandomUniform]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerConfig {
    pub k: usize,
    #[serde(default)]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    /// Cap on `C(n, k)` for the exhaustive oracle.
    #[serde(default)]
    pub enumeration_cap: Option<u128>,
}

fn default_samples() -> u64 {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureConfig {
    /// Largest `n` for exact enumeration.
    #[serde(default)]
    pub exact_cap: Option<usize>,
    #[serde(default = "default_samples")]
    pub samples: u64,
}

impl Default for CurvatureConfig {
    fn default() -> Self {
        Self { exact_cap: None, samples: default_samples() }
    }
}

fn default_meta() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theorem2Config {
    /// Deviation `q` of the spectral event.
    pub q: f64,
    /// Norm bound `C`; defaults to `m σ_h²`.
    #[serde(default)]
    pub norm_bound: Option<f64>,
    #[serde(default = "default_meta")]
    pub meta_repetitions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub sim: ExchangeSimConfig,
    pub budgets: Vec<usize>,
    pub gammas: Vec<f64>,
}

fn default_instances() -> usize {
    1
}

fn default_trials() -> usize {
    1
}

fn default_horizon() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    /// Seeds per instance for randomized methods (or runs / trials, depending on the kind).
    #[serde(default = "default_trials")]
    pub trials: usize,
    /// Number of independently drawn problem instances.
    #[serde(default = "default_instances")]
    pub instances: usize,
    /// Time steps for multi-step experiments.
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub scheduler: Option<SchedulerConfig>,
    #[serde(default)]
    pub curvature: Option<CurvatureConfig>,
    #[serde(default)]
    pub theorem2: Option<Theorem2Config>,
    #[serde(default)]
    pub network: Option<NetworkConfig>,
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

fn matrix_from_rows(rows: &[Vec<f64>], field: &str) -> Result<DMatrix<f64>, HarnessError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(config_err(format!("{field}: rows must be non-empty and of equal length")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl SquareSpec {
    pub fn build(&self, dim: usize, field: &str) -> Result<DMatrix<f64>, HarnessError> {
        let m = match self {
            SquareSpec::Identity => DMatrix::identity(dim, dim),
            SquareSpec::ScaledIdentity { scale } => DMatrix::identity(dim, dim) * *scale,
            SquareSpec::Diagonal { values } => {
                DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values))
            }
            SquareSpec::Explicit { rows } => matrix_from_rows(rows, field)?,
        };
        if m.shape() != (dim, dim) {
            return Err(config_err(format!("{field}: expected a {dim}x{dim} matrix, got {}x{}", m.nrows(), m.ncols())));
        }
        Ok(m)
    }
}

impl MeasurementSpec {
    /// Explicit matrices, validated against `n × m`.
    pub fn explicit(&self, n: usize, m: usize) -> Result<Option<Vec<DMatrix<f64>>>, HarnessError> {
        let mats = match self {
            MeasurementSpec::Explicit { rows } => vec![matrix_from_rows(rows, "model.measurements.rows")?],
            MeasurementSpec::PerStep { steps } => steps
                .iter()
                .map(|s| matrix_from_rows(s, "model.measurements.steps"))
                .collect::<Result<_, _>>()?,
            _ => return Ok(None),
        };
        if mats.is_empty() || mats.iter().any(|a| a.shape() != (n, m)) {
            return Err(config_err(format!("model.measurements: every matrix must be {n}x{m}")));
        }
        Ok(Some(mats))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn display_name(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.kind.as_str().to_string())
    }

    pub fn model(&self) -> Result<&ModelConfig, HarnessError> {
        self.model.as_ref().ok_or_else(|| config_err(format!("[model] is required for {}", self.kind.as_str())))
    }

    pub fn scheduler(&self) -> Result<&SchedulerConfig, HarnessError> {
        self.scheduler
            .as_ref()
            .ok_or_else(|| config_err(format!("[scheduler] is required for {}", self.kind.as_str())))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(config_err("trials must be at least 1"));
        }
        if self.instances == 0 {
            return Err(config_err("instances must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(config_err("horizon must be at least 1"));
        }
        if let Some(model) = &self.model {
            if model.m == 0 || model.n == 0 {
                return Err(config_err("model.m and model.n must be positive"));
            }
            if !(model.sigma > 0.0 && model.sigma.is_finite()) {
                return Err(config_err(format!("model.sigma must be positive, got {}", model.sigma)));
            }
            if let Some(d) = model.measurements.distribution() {
                if !(d.sigma_h() > 0.0) {
                    return Err(config_err("model.measurements.sigma_h must be positive"));
                }
            }
            model.sigma_x.build(model.m, "model.sigma_x")?;
            model.dynamics.build(model.m, "model.dynamics")?;
            model.measurements.explicit(model.n, model.m)?;
        }
        if let Some(s) = &self.scheduler {
            let n = self.model.as_ref().map(|m| m.n).unwrap_or(usize::MAX);
            if s.k == 0 || s.k > n {
                return Err(config_err(format!("scheduler.k = {} must lie in 1..={n}", s.k)));
            }
            for &eps in &s.epsilons {
                validate_epsilon(eps, s.k).map_err(|_| {
                    config_err(format!(
                        "scheduler.epsilons: {eps} is outside [e^-{}, 1)",
                        s.k
                    ))
                })?;
            }
            if s.methods.contains(&Method::RandomizedGreedy) && s.epsilons.is_empty() {
                return Err(config_err("scheduler.epsilons must be non-empty for randomized_greedy"));
            }
        }
        if let Some(t) = &self.theorem2 {
            if !(t.q > 0.0) {
                return Err(config_err("theorem2.q must be positive"));
            }
            if t.meta_repetitions == 0 {
                return Err(config_err("theorem2.meta_repetitions must be at least 1"));
            }
        }
        if let Some(n) = &self.network {
            n.sim.validate().map_err(|e| config_err(format!("network: {e}")))?;
            if n.budgets.is_empty() || n.budgets.contains(&0) {
                return Err(config_err("network.budgets must be non-empty and positive"));
            }
            if n.gammas.is_empty() || n.gammas.iter().any(|g| !(*g >= 0.0)) {
                return Err(config_err("network.gammas must be non-empty and non-negative"));
            }
        }
        let required = match self.kind {
            ExperimentKind::SingleStepSchedule | ExperimentKind::MultiStepKalman => {
                self.model()?;
                self.scheduler()?;
                Ok(())
            }
            ExperimentKind::CurvatureStudy => self.model().map(|_| ()),
            ExperimentKind::Theorem2Study => {
                let model = self.model()?;
                if !matches!(model.measurements, MeasurementSpec::Sphere { .. }) {
                    return Err(config_err("theorem2_study requires model.measurements.kind = \"sphere\""));
                }
                self.theorem2
                    .as_ref()
                    .map(|_| ())
                    .ok_or_else(|| config_err("[theorem2] is required for theorem2_study"))
            }
            ExperimentKind::NetworkBalance => self
                .network
                .as_ref()
                .map(|_| ())
                .ok_or_else(|| config_err("[network] is required for network_balance")),
        };
        required
    }
}
