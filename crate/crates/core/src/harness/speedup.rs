//! Gain-evaluation and wall-clock comparison of classic and randomized greedy.

use serde::Serialize;
use serde_json::json;

use super::config::ExperimentConfig;
use super::metrics::MetricsRow;
use super::single_step::{build_instance, trial_seed};
use super::{timed, ExperimentOutput, HarnessError};
use crate::scheduler::{classic_greedy, randomized_greedy, sample_size, Method, SensorInstance};

/// Relative band around `k / ln(1/ε)` that the measured gain-evaluation ratio must hit.
pub const RATIO_BAND: f64 = 0.25;
/// The band is only asserted from this many sensors on.
pub const BAND_MIN_SENSORS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedupEntry {
    pub epsilon: f64,
    pub sample_size: usize,
    /// `k / ln(1/ε)`.
    pub predicted_ratio: f64,
    pub classic_gain_evals: u64,
    pub randomized_gain_evals: f64,
    pub gain_eval_ratio: f64,
    pub relative_deviation: f64,
    /// `None` below [`BAND_MIN_SENSORS`].
    pub within_band: Option<bool>,
    pub classic_median_ns: u64,
    pub randomized_median_ns: u64,
    pub wall_time_ratio: f64,
    /// Per-repeat `(seed, gain_evals, ns)` of the randomized runs.
    #[serde(skip)]
    pub runs: Vec<(u64, u64, u64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedupReport {
    pub n: usize,
    pub k: usize,
    pub repeats: usize,
    pub entries: Vec<SpeedupEntry>,
    /// Ratio grows with ε, strictly whenever the pool size changes.
    pub monotone_in_epsilon: bool,
    pub violations: usize,
}

fn median(v: &mut [u64]) -> u64 {
    v.sort_unstable();
    v[v.len() / 2]
}

/// Runs classic greedy and randomized greedy for each ε on the same instance,
/// `repeats` times each, serially so that the timings do not compete for cores.
pub fn speedup_report(
    instance: &SensorInstance,
    k: usize,
    epsilons: &[f64],
    repeats: usize,
    seed_of: impl Fn(usize, usize) -> u64,
) -> crate::Result<SpeedupReport> {
    let n = instance.num_sensors();
    let repeats = repeats.max(1);
    let mut classic_ns = Vec::with_capacity(repeats);
    let mut classic_evals = 0;
    for _ in 0..repeats {
        let (s, ns) = timed(|| classic_greedy(instance, k));
        classic_evals = s?.gain_evals;
        classic_ns.push(ns);
    }
    let classic_median_ns = median(&mut classic_ns);

    let mut entries = Vec::with_capacity(epsilons.len());
    for (eps_idx, &epsilon) in epsilons.iter().enumerate() {
        let s = sample_size(n, k, epsilon)?;
        let mut runs = Vec::with_capacity(repeats);
        for r in 0..repeats {
            let seed = seed_of(eps_idx, r);
            let (sched, ns) = timed(|| randomized_greedy(instance, k, epsilon, seed));
            runs.push((seed, sched?.gain_evals, ns));
        }
        let randomized_gain_evals = runs.iter().map(|r| r.1 as f64).sum::<f64>() / repeats as f64;
        let mut times: Vec<u64> = runs.iter().map(|r| r.2).collect();
        let randomized_median_ns = median(&mut times);
        let predicted_ratio = k as f64 / (1.0 / epsilon).ln();
        let gain_eval_ratio = classic_evals as f64 / randomized_gain_evals;
        let relative_deviation = (gain_eval_ratio - predicted_ratio).abs() / predicted_ratio;
        entries.push(SpeedupEntry {
            epsilon,
            sample_size: s,
            predicted_ratio,
            classic_gain_evals: classic_evals,
            randomized_gain_evals,
            gain_eval_ratio,
            relative_deviation,
            within_band: (n >= BAND_MIN_SENSORS).then_some(relative_deviation <= RATIO_BAND),
            classic_median_ns,
            randomized_median_ns,
            wall_time_ratio: classic_median_ns as f64 / randomized_median_ns.max(1) as f64,
            runs,
        });
    }

    let mut by_eps: Vec<&SpeedupEntry> = entries.iter().collect();
    by_eps.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    let monotone_in_epsilon = by_eps.windows(2).all(|w| {
        if w[0].sample_size == w[1].sample_size {
            w[1].gain_eval_ratio >= w[0].gain_eval_ratio
        } else {
            w[1].gain_eval_ratio > w[0].gain_eval_ratio
        }
    });
    let violations = entries.iter().filter(|e| e.within_band == Some(false)).count()
        + usize::from(!monotone_in_epsilon);
    Ok(SpeedupReport { n, k, repeats, entries, monotone_in_epsilon, violations })
}

pub(crate) fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let sched = cfg.scheduler()?;
    let model = cfg.model()?;
    if sched.epsilons.is_empty() {
        return Err(HarnessError::Config("scheduler.epsilons must be non-empty for speedup".into()));
    }
    let name = cfg.display_name();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for instance in 0..cfg.instances {
        let inst = build_instance(model, cfg.seed, instance)?;
        let report = speedup_report(&inst, sched.k, &sched.epsilons, cfg.trials, |e, r| {
            trial_seed(cfg.seed, instance, Method::RandomizedGreedy, e, r)
        })?;
        let mut classic = MetricsRow::new(&name, Method::ClassicGreedy.as_str());
        classic.gain_evals = report.entries.first().map(|e| e.classic_gain_evals);
        classic.wall_time_ns = report.entries.first().map_or(0, |e| e.classic_median_ns);
        classic.instance = Some(instance);
        rows.push(classic);
        for e in &report.entries {
            for &(seed, evals, ns) in &e.runs {
                let mut row = MetricsRow::new(&name, Method::RandomizedGreedy.as_str());
                row.epsilon = Some(e.epsilon);
                row.seed = Some(seed);
                row.gain_evals = Some(evals);
                row.wall_time_ns = ns;
                row.instance = Some(instance);
                rows.push(row);
            }
        }
        reports.push(report);
    }
    let violations = reports.iter().map(|r| r.violations).sum();
    let summary = json!({
        "experiment": name,
        "kind": cfg.kind.as_str(),
        "mode": "speedup",
        "seed": cfg.seed,
        "m": model.m,
        "n": model.n,
        "k": sched.k,
        "instances": cfg.instances,
        "repeats": cfg.trials,
        "ratio_band": RATIO_BAND,
        "reports": reports,
        "bound_violations": { "total": violations },
    });
    Ok(ExperimentOutput { rows, summary, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn instance(n: usize, m: usize) -> SensorInstance {
        let mut r = rng::seeded(11);
        let rows = DMatrix::<f64>::from_fn(n, m, |_, _| r.sample(StandardNormal));
        SensorInstance::new(DMatrix::identity(m, m), rows, 1.0).unwrap()
    }

    #[test]
    fn classic_epsilon_gives_unit_ratio() {
        let inst = instance(30, 3);
        let k = 5;
        let rep = speedup_report(&inst, k, &[(-(k as f64)).exp()], 2, |e, r| (e * 10 + r) as u64).unwrap();
        assert_eq!(rep.entries[0].gain_eval_ratio, 1.0);
        assert!((rep.entries[0].predicted_ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_grows_with_epsilon_and_counts_are_exact() {
        let inst = instance(200, 4);
        let rep = speedup_report(&inst, 20, &[0.01, 0.1, 0.5], 2, |e, r| (e * 10 + r) as u64).unwrap();
        assert!(rep.monotone_in_epsilon);
        // classic: Σ_{i<20} (200 − i) = 3810; randomized at ε = 0.1: 20 rounds of ⌈10 ln 10⌉ = 24
        assert_eq!(rep.entries[1].classic_gain_evals, 3810);
        assert_eq!(rep.entries[1].randomized_gain_evals, 480.0);
        assert_eq!(rep.entries[1].within_band, Some(true));
    }
}
