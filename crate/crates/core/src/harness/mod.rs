//! Experiment runner behind the `sensor-sched` binary: reads a TOML config,
//! fans trials out over rayon, and writes `metrics.csv` plus `summary.json`.
//!
//! Every random draw comes from a substream keyed on (instance, method, ε, trial, t),
//! so results do not depend on the thread count or on completion order.

pub mod config;
pub mod metrics;
mod network_balance;
mod single_step;
mod speedup;
mod studies;

use std::path::{Path, PathBuf};

use serde_json::Value;

pub use config::{ExperimentConfig, ExperimentKind};
pub use metrics::{MetricsRow, OutputFormat};
pub use network_balance::spearman;
pub use speedup::{speedup_report, SpeedupEntry, SpeedupReport};

use crate::Error;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Numeric(#[from] Error),
    #[error("bound violation: {0}")]
    BoundViolation(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl HarnessError {
    /// 2 for configuration problems, 3 for numeric failures and oracle caps,
    /// 4 for a detected bound violation, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Numeric(Error::InvalidEpsilon { .. } | Error::InfeasibleBudget { .. }) => 2,
            HarnessError::Numeric(_) => 3,
            HarnessError::BoundViolation(_) => 4,
            HarnessError::Io(_) => 1,
        }
    }
}

/// CLI subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Whatever the config's `kind` asks for.
    Run,
    VerifyTheorem1,
    Speedup,
    Curvature,
    Theorem2,
    Network,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Run => "run",
            Command::VerifyTheorem1 => "verify-theorem1",
            Command::Speedup => "speedup",
            Command::Curvature => "curvature",
            Command::Theorem2 => "theorem2",
            Command::Network => "network",
        }
    }

    /// Commands that turn a violated bound into exit code 4.
    pub fn is_verification(&self) -> bool {
        matches!(self, Command::VerifyTheorem1 | Command::Speedup | Command::Theorem2)
    }
}

/// Overrides coming from global CLI flags.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub format: OutputFormat,
}

/// Rows, summary and violation count of one experiment, before anything is written.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub rows: Vec<MetricsRow>,
    pub summary: Value,
    /// Failed checks counted in the summary.
    pub violations: usize,
}

/// Where an executed experiment left its files.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub output: ExperimentOutput,
    pub metrics_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Runs `command` on an already parsed config.
pub fn run_experiment(command: Command, cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    use ExperimentKind::*;
    let wrong_kind = |expected: &str| {
        Err(HarnessError::Config(format!(
            "`{}` needs a {expected} config, got kind = \"{}\"",
            command.as_str(),
            cfg.kind.as_str()
        )))
    };
    match (command, cfg.kind) {
        (Command::Run, SingleStepSchedule) => single_step::run(cfg, false),
        (Command::Run, MultiStepKalman) => single_step::run_multi_step(cfg),
        (Command::Run | Command::Curvature, CurvatureStudy) => studies::curvature(cfg),
        (Command::Curvature, SingleStepSchedule | MultiStepKalman) => studies::curvature(cfg),
        (Command::Run | Command::Theorem2, Theorem2Study) => studies::theorem2(cfg),
        (Command::Run | Command::Network, NetworkBalance) => network_balance::run(cfg),
        (Command::VerifyTheorem1, SingleStepSchedule) => single_step::run(cfg, true),
        (Command::Speedup, SingleStepSchedule) => speedup::run(cfg),
        (Command::VerifyTheorem1 | Command::Speedup, _) => wrong_kind("single_step_schedule"),
        (Command::Curvature, _) => wrong_kind("curvature_study"),
        (Command::Theorem2, _) => wrong_kind("theorem2_study"),
        (Command::Network, _) => wrong_kind("network_balance"),
    }
}

/// Output directory: the `--out-dir` flag, then the config's `output`, then `out/<name>`.
pub fn output_dir(cfg: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    opts.out_dir
        .clone()
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| Path::new("out").join(cfg.display_name()))
}

/// Loads the config, applies flag overrides, runs and writes both output files.
///
/// A verification command whose checks fail still writes its files before
/// returning [`HarnessError::BoundViolation`].
pub fn execute(command: Command, config_path: &Path, opts: &RunOptions) -> Result<RunResult, HarnessError> {
    let mut cfg = ExperimentConfig::load(config_path)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    let dir = output_dir(&cfg, opts);
    let output = run_experiment(command, &cfg)?;
    let metrics_path = metrics::write_metrics(&output.rows, &dir, opts.format)?;
    let summary_path = metrics::write_summary(&output.summary, &dir)?;
    log::info!(
        "{}: {} rows -> {}, summary -> {}",
        cfg.display_name(),
        output.rows.len(),
        metrics_path.display(),
        summary_path.display()
    );
    if command.is_verification() && output.violations > 0 {
        return Err(HarnessError::BoundViolation(format!(
            "{} failed check(s); see {}",
            output.violations,
            summary_path.display()
        )));
    }
    Ok(RunResult { output, metrics_path, summary_path })
}

/// Monotonic wall time of `f` in nanoseconds.
pub(crate) fn timed<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let start = std::time::Instant::now();
    let out = f();
    (out, start.elapsed().as_nanos() as u64)
}
