//! Curvature study and the Monte-Carlo check of the probabilistic curvature bound.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::{ExperimentConfig, MeasurementSpec};
use super::metrics::MetricsRow;
use super::single_step::build_instance;
use super::{timed, ExperimentOutput, HarnessError};
use crate::curvature::{
    exact_curvature, sampled_curvature, theorem2_empirical_check, CurvatureReport, BOUND_SLACK,
    DEFAULT_EXACT_CAP,
};
use crate::rng::derive_seed;
use crate::scheduler::{beta, guarantee_alpha, sample_size};

const CURVATURE_STREAM: u64 = 2;
const THEOREM2_STREAM: u64 = 3;

/// Share of meta-repetitions whose event frequency must reach the probability bound.
pub const PROBABILITY_QUORUM: f64 = 0.95;

#[derive(Debug, Clone, Serialize)]
struct CurvatureSummary {
    instance: usize,
    report: CurvatureReport,
    submodular: bool,
}

pub(crate) fn curvature(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let model = cfg.model()?;
    let curv = cfg.curvature.clone().unwrap_or_default();
    let cap = curv.exact_cap.unwrap_or(DEFAULT_EXACT_CAP);
    let k_eps = cfg.scheduler.as_ref().map(|s| (s.k, s.epsilons.clone()));
    let name = cfg.display_name();

    let results: Vec<(CurvatureReport, u64)> = (0..cfg.instances)
        .into_par_iter()
        .map(|i| {
            let inst = build_instance(model, cfg.seed, i)?;
            let (rep, ns) = timed(|| {
                if model.n <= cap {
                    exact_curvature(&inst, Some(cap))
                } else {
                    sampled_curvature(&inst, curv.samples, derive_seed(cfg.seed, &[CURVATURE_STREAM, i as u64]))
                }
            });
            Ok((rep?, ns))
        })
        .collect::<Result<_, HarnessError>>()?;

    let mut rows = Vec::new();
    let mut per_instance = Vec::new();
    for (i, (rep, ns)) in results.into_iter().enumerate() {
        let method = if model.n <= cap { "exact_curvature" } else { "sampled_curvature" };
        let mut base = MetricsRow::new(&name, method);
        base.instance = Some(i);
        base.c_max = Some(rep.c_max);
        base.wall_time_ns = ns;
        match &k_eps {
            Some((k, eps)) if !eps.is_empty() => {
                for &e in eps {
                    let s = sample_size(model.n, *k, e)?;
                    let mut row = base.clone();
                    row.epsilon = Some(e);
                    row.alpha_card = Some(guarantee_alpha(rep.c_max, e, beta(s, model.n)).value);
                    row.alpha_card1 = Some(guarantee_alpha(rep.c_max, e, 1.0).value);
                    rows.push(row);
                }
            }
            _ => rows.push(base),
        }
        per_instance.push(CurvatureSummary { instance: i, submodular: rep.c_max <= 1.0, report: rep });
    }
    let c_values: Vec<f64> = per_instance.iter().map(|s| s.report.c_max).collect();
    let summary = json!({
        "experiment": name,
        "kind": cfg.kind.as_str(),
        "seed": cfg.seed,
        "m": model.m,
        "n": model.n,
        "instances": cfg.instances,
        "exact_cap": cap,
        "c_max": super::metrics::mean_std(&c_values),
        "submodular_instances": per_instance.iter().filter(|s| s.submodular).count(),
        "per_instance": per_instance,
        "bound_violations": { "total": 0 },
    });
    Ok(ExperimentOutput { rows, summary, violations: 0 })
}

#[derive(Debug, Clone, Serialize)]
struct RepetitionSummary {
    repetition: usize,
    seed: u64,
    event_count: usize,
    event_frequency: f64,
    meets_probability_bound: bool,
    conditional_violations: usize,
    max_bound_ratio: f64,
}

pub(crate) fn theorem2(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let model = cfg.model()?;
    let t2 = cfg
        .theorem2
        .as_ref()
        .ok_or_else(|| HarnessError::Config("[theorem2] is required".into()))?;
    let sigma_h = match model.measurements {
        MeasurementSpec::Sphere { sigma_h } => sigma_h,
        _ => return Err(HarnessError::Config("theorem2 needs model.measurements.kind = \"sphere\"".into())),
    };
    let prior = model.sigma_x.build(model.m, "model.sigma_x")?;
    let norm_bound = t2.norm_bound.unwrap_or(model.m as f64 * sigma_h * sigma_h);
    let name = cfg.display_name();

    let mut rows = Vec::new();
    let mut reps = Vec::new();
    let mut first = None;
    for rep in 0..t2.meta_repetitions {
        let seed = derive_seed(cfg.seed, &[THEOREM2_STREAM, rep as u64]);
        let (check, ns) = timed(|| {
            theorem2_empirical_check(&prior, model.sigma, sigma_h, norm_bound, t2.q, model.n, cfg.trials, seed)
        });
        let check = check?;
        let per_trial_ns = ns / cfg.trials as u64;
        for (t, trial) in check.per_trial.iter().enumerate() {
            let mut row = MetricsRow::new(&name, "theorem2");
            row.seed = Some(seed);
            row.t = t;
            row.instance = Some(rep);
            row.c_max = trial.c_max;
            row.curvature_bound = Some(check.curvature_bound);
            row.event_holds = Some(trial.event_holds);
            row.bound_satisfied = trial.c_max.map(|c| c <= check.curvature_bound * (1.0 + BOUND_SLACK));
            row.wall_time_ns = per_trial_ns;
            rows.push(row);
        }
        reps.push(RepetitionSummary {
            repetition: rep,
            seed,
            event_count: check.event_count,
            event_frequency: check.event_frequency,
            meets_probability_bound: check.event_frequency >= check.probability_bound,
            conditional_violations: check.conditional_violations,
            max_bound_ratio: check.max_bound_ratio,
        });
        first.get_or_insert((check.params, check.curvature_bound, check.probability_bound));
    }
    let (params, curvature_bound, probability_bound) = first.expect("meta_repetitions >= 1");
    let conditional = reps.iter().map(|r| r.conditional_violations).sum::<usize>();
    let met = reps.iter().filter(|r| r.meets_probability_bound).count();
    let met_share = met as f64 / reps.len() as f64;
    let quorum_ok = met_share >= PROBABILITY_QUORUM;
    let violations = conditional + usize::from(!quorum_ok);
    let summary = json!({
        "experiment": name,
        "kind": cfg.kind.as_str(),
        "seed": cfg.seed,
        "params": params,
        "phi": params.phi(),
        "curvature_bound": curvature_bound,
        "probability_bound": probability_bound,
        "trials_per_repetition": cfg.trials,
        "repetitions": reps,
        "conditional_violations": conditional,
        "repetitions_meeting_probability": met,
        "share_meeting_probability": met_share,
        "probability_quorum": PROBABILITY_QUORUM,
        "probability_quorum_met": quorum_ok,
        "bound_violations": { "conditional": conditional, "quorum": usize::from(!quorum_ok), "total": violations },
    });
    Ok(ExperimentOutput { rows, summary, violations })
}
