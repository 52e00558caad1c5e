//! The metrics table and its CSV / JSON writers.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;

/// Column excluded when comparing re-runs.
pub const TIMING_COLUMN: &str = "wall_time_ns";

pub const COLUMNS: [&str; 21] = [
    "experiment", "method", "epsilon", "gamma", "seed", "t", "objective", "mse", "opt_objective",
    "alpha_card", "alpha_card1", "bound_satisfied", "gain_evals", "wall_time_ns", "instance", "node",
    "budget", "c_max", "curvature_bound", "event_holds", "pairwise_mse_distance",
];

/// One line of `metrics.csv`. Optional cells are written empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub experiment: String,
    pub method: String,
    pub epsilon: Option<f64>,
    pub gamma: Option<f64>,
    pub seed: Option<u64>,
    pub t: usize,
    pub objective: Option<f64>,
    pub mse: Option<f64>,
    pub opt_objective: Option<f64>,
    pub alpha_card: Option<f64>,
    pub alpha_card1: Option<f64>,
    pub bound_satisfied: Option<bool>,
    pub gain_evals: Option<u64>,
    pub wall_time_ns: u64,
    pub instance: Option<usize>,
    pub node: Option<usize>,
    pub budget: Option<usize>,
    pub c_max: Option<f64>,
    pub curvature_bound: Option<f64>,
    pub event_holds: Option<bool>,
    pub pairwise_mse_distance: Option<f64>,
}

impl MetricsRow {
    pub fn new(experiment: &str, method: &str) -> Self {
        Self { experiment: experiment.to_string(), method: method.to_string(), ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn file_name(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "metrics.csv",
            OutputFormat::Json => "metrics.json",
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

/// Floats go through `ryu`, which prints the shortest string that parses back to the same bits.
pub fn write_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        // serde writes the header lazily, so an empty table needs it spelled out.
        w.write_record(COLUMNS)?;
    }
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics(rows: &[MetricsRow], dir: &Path, format: OutputFormat) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(format.file_name());
    let file = std::fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    let buf = std::io::BufWriter::new(file);
    match format {
        OutputFormat::Csv => write_csv(rows, buf).map_err(|e| io_err(&path, e))?,
        OutputFormat::Json => serde_json::to_writer_pretty(buf, rows).map_err(|e| io_err(&path, e))?,
    }
    Ok(path)
}

pub fn write_summary<T: Serialize>(summary: &T, dir: &Path) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(summary).map_err(|e| io_err(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
    Ok(path)
}

/// Reads a metrics CSV back with the timing column blanked, for re-run comparisons.
pub fn read_csv_without_timing(path: &Path) -> Result<Vec<Vec<String>>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_err(path, e))?;
    let headers = r.headers().map_err(|e| io_err(path, e))?.clone();
    let skip = headers.iter().position(|h| h == TIMING_COLUMN);
    let mut out = vec![headers.iter().map(str::to_string).collect::<Vec<_>>()];
    for rec in r.records() {
        let rec = rec.map_err(|e| io_err(path, e))?;
        out.push(
            rec.iter()
                .enumerate()
                .map(|(i, v)| if Some(i) == skip { String::new() } else { v.to_string() })
                .collect(),
        );
    }
    Ok(out)
}

/// Sample mean and (n-1) standard deviation; `std` is 0 for a single value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

pub fn mean_std(values: &[f64]) -> MeanStd {
    let count = values.len();
    if count == 0 {
        return MeanStd { mean: f64::NAN, std: f64::NAN, count };
    }
    let mean = values.iter().sum::<f64>() / count as f64;
    let std = if count > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
    } else {
        0.0
    };
    MeanStd { mean, std, count }
}
