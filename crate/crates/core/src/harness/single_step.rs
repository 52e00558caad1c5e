//! Single-step schedule comparisons, the Theorem 1 verification and the multi-step filter run.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::{ExperimentConfig, ModelConfig, SchedulerConfig};
use super::metrics::{mean_std, MeanStd, MetricsRow};
use super::{timed, ExperimentOutput, HarnessError};
use crate::curvature::{exact_curvature, BOUND_SLACK, DEFAULT_EXACT_CAP};
use crate::rng::derive_seed;
use crate::scheduler::{
    beta, brute_force_optimal, classic_greedy, guarantee_alpha, mse_bound, random_schedule,
    randomized_greedy, sample_size, Guarantee, Method, Schedule, SensorInstance,
};
use crate::state_space::{predict_covariance, MatrixSequence, StateSpaceModel};

const INSTANCE_STREAM: u64 = 0;
const TRIAL_STREAM: u64 = 1;

/// The model for instance `i`. Random measurement matrices come from their own substream.
pub(crate) fn build_model(model: &ModelConfig, seed: u64, instance: usize) -> Result<StateSpaceModel, HarnessError> {
    let prior = model.sigma_x.build(model.m, "model.sigma_x")?;
    let dynamics = model.dynamics.build(model.m, "model.dynamics")?;
    let measurements = match model.measurements.explicit(model.n, model.m)? {
        Some(mut mats) if mats.len() == 1 => MatrixSequence::Fixed(mats.remove(0)),
        Some(mats) => MatrixSequence::PerStep(mats),
        None => MatrixSequence::Random {
            rows: model.n,
            cols: model.m,
            dist: model.measurements.distribution().expect("non-explicit spec is random"),
            seed: derive_seed(seed, &[INSTANCE_STREAM, instance as u64]),
        },
    };
    Ok(StateSpaceModel::new(prior, MatrixSequence::Fixed(dynamics), measurements, model.sigma)?)
}

/// The `t = 0` scheduling problem of instance `i`, with `Σ_x` as the predicted covariance.
pub(crate) fn build_instance(model: &ModelConfig, seed: u64, instance: usize) -> Result<SensorInstance, HarnessError> {
    let m = build_model(model, seed, instance)?;
    Ok(SensorInstance::new(m.initial_cov().clone(), m.measurement(0)?, m.sigma())?)
}

/// Seed of one randomized run.
pub(crate) fn trial_seed(base: u64, instance: usize, method: Method, eps_idx: usize, trial: usize) -> u64 {
    let tag = match method {
        Method::RandomizedGreedy => 0,
        Method::RandomUniform => 1,
        Method::ClassicGreedy => 2,
        Method::BruteForceOptimal => 3,
    };
    derive_seed(base, &[TRIAL_STREAM, instance as u64, tag, eps_idx as u64, trial as u64])
}

/// One method/ε combination to run.
#[derive(Debug, Clone, Copy)]
struct Variant {
    method: Method,
    eps_idx: usize,
    epsilon: Option<f64>,
}

impl Variant {
    fn runs(&self, trials: usize) -> usize {
        match self.method {
            Method::RandomizedGreedy | Method::RandomUniform => trials,
            Method::ClassicGreedy | Method::BruteForceOptimal => 1,
        }
    }

    fn is_random(&self) -> bool {
        matches!(self.method, Method::RandomizedGreedy | Method::RandomUniform)
    }

    fn schedule(&self, inst: &SensorInstance, sched: &SchedulerConfig, seed: u64) -> Result<Schedule, HarnessError> {
        Ok(match self.method {
            Method::ClassicGreedy => classic_greedy(inst, sched.k)?,
            Method::RandomizedGreedy => randomized_greedy(inst, sched.k, self.epsilon.expect("ε set"), seed)?,
            Method::RandomUniform => random_schedule(inst, sched.k, seed)?,
            Method::BruteForceOptimal => brute_force_optimal(inst, sched.k, sched.enumeration_cap)?,
        })
    }
}

fn variants(methods: &[Method], epsilons: &[f64]) -> Vec<Variant> {
    let order = [
        Method::BruteForceOptimal,
        Method::ClassicGreedy,
        Method::RandomizedGreedy,
        Method::RandomUniform,
    ];
    let mut out = Vec::new();
    for method in order.into_iter().filter(|m| methods.contains(m)) {
        if method == Method::RandomizedGreedy {
            for (eps_idx, &eps) in epsilons.iter().enumerate() {
                out.push(Variant { method, eps_idx, epsilon: Some(eps) });
            }
        } else {
            out.push(Variant { method, eps_idx: 0, epsilon: None });
        }
    }
    out
}

/// Guarantee check for one method/ε on one instance.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub method: Method,
    pub epsilon: f64,
    pub sample_size: usize,
    pub beta: f64,
    pub alpha_card: Guarantee,
    pub alpha_card1: Guarantee,
    pub mean_objective: f64,
    pub mean_mse: f64,
    /// `α·f(O*)`.
    pub objective_bound: f64,
    /// `α₁·MSE_o + (1 − α₁)·Tr(P)`.
    pub mse_bound: f64,
    pub card_satisfied: bool,
    pub card1_satisfied: bool,
}

#[derive(Debug, Clone, Serialize)]
struct Ordering {
    epsilon: f64,
    brute_ge_classic: Option<bool>,
    classic_ge_randomized: Option<bool>,
    randomized_ge_random: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
struct InstanceSummary {
    instance: usize,
    prior_trace: f64,
    opt_objective: Option<f64>,
    opt_mse: Option<f64>,
    c_max: Option<f64>,
    curvature_skipped: Option<u64>,
    checks: Vec<BoundCheck>,
    ordering: Vec<Ordering>,
}

struct Oracle {
    objective: f64,
    mse: f64,
    c_max: f64,
}

fn ge_with_slack(lhs: f64, rhs: f64) -> bool {
    lhs >= rhs - BOUND_SLACK * rhs.abs().max(1.0)
}

fn bound_check(
    method: Method,
    epsilon: f64,
    inst: &SensorInstance,
    k: usize,
    oracle: &Oracle,
    objectives: &[f64],
    mses: &[f64],
) -> Result<BoundCheck, HarnessError> {
    let n = inst.num_sensors();
    let s = sample_size(n, k, epsilon)?;
    let b = beta(s, n);
    let alpha_card = guarantee_alpha(oracle.c_max, epsilon, b);
    let alpha_card1 = guarantee_alpha(oracle.c_max, epsilon, 1.0);
    let mean_objective = mean_std(objectives).mean;
    let mean_mse = mean_std(mses).mean;
    let objective_bound = alpha_card.value * oracle.objective;
    let mse_limit = mse_bound(alpha_card1.value, oracle.mse, inst.prior_trace());
    Ok(BoundCheck {
        method,
        epsilon,
        sample_size: s,
        beta: b,
        alpha_card,
        alpha_card1,
        mean_objective,
        mean_mse,
        objective_bound,
        mse_bound: mse_limit,
        card_satisfied: ge_with_slack(mean_objective, objective_bound),
        card1_satisfied: ge_with_slack(mse_limit, mean_mse),
    })
}

struct InstanceOutcome {
    rows: Vec<MetricsRow>,
    summary: InstanceSummary,
}

fn run_instance(
    cfg: &ExperimentConfig,
    instance: usize,
    methods: &[Method],
    verify: bool,
) -> Result<InstanceOutcome, HarnessError> {
    let model = cfg.model()?;
    let sched = cfg.scheduler()?;
    let k = sched.k;
    let name = cfg.display_name();
    let inst = build_instance(model, cfg.seed, instance)?;
    let exact_cap = cfg.curvature.as_ref().and_then(|c| c.exact_cap);

    let need_oracle = verify || methods.contains(&Method::BruteForceOptimal);
    let curvature = if need_oracle && (verify || model.n <= exact_cap.unwrap_or(DEFAULT_EXACT_CAP)) {
        Some(exact_curvature(&inst, exact_cap)?)
    } else {
        None
    };

    let all = variants(methods, &sched.epsilons);
    let runs: Vec<Vec<(Schedule, u64)>> = all
        .iter()
        .map(|v| {
            (0..v.runs(cfg.trials))
                .into_par_iter()
                .map(|trial| {
                    let seed = trial_seed(cfg.seed, instance, v.method, v.eps_idx, trial);
                    let (sched_out, ns) = timed(|| v.schedule(&inst, sched, seed));
                    sched_out.map(|s| (s, ns))
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;

    let oracle = all
        .iter()
        .zip(&runs)
        .find(|(v, _)| v.method == Method::BruteForceOptimal)
        .map(|(_, r)| &r[0].0)
        .zip(curvature.as_ref())
        .map(|(opt, c)| Oracle { objective: opt.objective, mse: opt.mse, c_max: c.c_max });

    let mut checks = Vec::new();
    let mut verdicts = Vec::with_capacity(all.len());
    for (v, r) in all.iter().zip(&runs) {
        let eps = match v.method {
            Method::ClassicGreedy => Some((-(k as f64)).exp()),
            Method::RandomizedGreedy => v.epsilon,
            _ => None,
        };
        let check = match (&oracle, eps) {
            (Some(o), Some(eps)) => {
                let objectives: Vec<f64> = r.iter().map(|(s, _)| s.objective).collect();
                let mses: Vec<f64> = r.iter().map(|(s, _)| s.mse).collect();
                Some(bound_check(v.method, eps, &inst, k, o, &objectives, &mses)?)
            }
            _ => None,
        };
        verdicts.push(check.clone());
        checks.extend(check);
    }

    let mut rows = Vec::new();
    for ((v, r), check) in all.iter().zip(&runs).zip(&verdicts) {
        for (s, ns) in r {
            let mut row = MetricsRow::new(&name, v.method.as_str());
            row.epsilon = v.epsilon;
            row.seed = if v.is_random() { s.seed } else { None };
            row.t = 0;
            row.objective = Some(s.objective);
            row.mse = Some(s.mse);
            row.opt_objective = oracle.as_ref().map(|o| o.objective);
            row.alpha_card = check.as_ref().map(|c| c.alpha_card.value);
            row.alpha_card1 = check.as_ref().map(|c| c.alpha_card1.value);
            row.bound_satisfied = check.as_ref().map(|c| c.card_satisfied && c.card1_satisfied);
            row.gain_evals = Some(s.gain_evals);
            row.wall_time_ns = *ns;
            row.instance = Some(instance);
            row.c_max = curvature.as_ref().map(|c| c.c_max);
            rows.push(row);
        }
    }

    let mean_of = |method: Method, eps: Option<f64>| {
        all.iter().zip(&runs).find(|(v, _)| v.method == method && v.epsilon == eps).map(|(_, r)| {
            r.iter().map(|(s, _)| s.objective).sum::<f64>() / r.len() as f64
        })
    };
    let brute = mean_of(Method::BruteForceOptimal, None);
    let classic = mean_of(Method::ClassicGreedy, None);
    let random = mean_of(Method::RandomUniform, None);
    let cmp = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| ge_with_slack(a, b));
    let ordering = sched
        .epsilons
        .iter()
        .filter(|_| methods.contains(&Method::RandomizedGreedy))
        .map(|&eps| {
            let rand_mean = mean_of(Method::RandomizedGreedy, Some(eps));
            Ordering {
                epsilon: eps,
                brute_ge_classic: cmp(brute, classic),
                classic_ge_randomized: cmp(classic, rand_mean),
                randomized_ge_random: cmp(rand_mean, random),
            }
        })
        .collect();

    Ok(InstanceOutcome {
        rows,
        summary: InstanceSummary {
            instance,
            prior_trace: inst.prior_trace(),
            opt_objective: oracle.as_ref().map(|o| o.objective),
            opt_mse: oracle.as_ref().map(|o| o.mse),
            c_max: curvature.as_ref().map(|c| c.c_max),
            curvature_skipped: curvature.as_ref().map(|c| c.skipped),
            checks,
            ordering,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
struct GroupSummary {
    method: String,
    epsilon: Option<f64>,
    objective: MeanStd,
    mse: MeanStd,
    mean_gain_evals: f64,
}

/// Aggregates per `(method, ε)`, in first-appearance order.
fn group_rows(rows: &[MetricsRow]) -> Vec<GroupSummary> {
    let mut keys: Vec<(String, Option<u64>)> = Vec::new();
    for r in rows {
        let key = (r.method.clone(), r.epsilon.map(f64::to_bits));
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(method, eps_bits)| {
            let members: Vec<&MetricsRow> = rows
                .iter()
                .filter(|r| r.method == method && r.epsilon.map(f64::to_bits) == eps_bits)
                .collect();
            let obj: Vec<f64> = members.iter().filter_map(|r| r.objective).collect();
            let mse: Vec<f64> = members.iter().filter_map(|r| r.mse).collect();
            let evals: Vec<f64> = members.iter().filter_map(|r| r.gain_evals).map(|e| e as f64).collect();
            GroupSummary {
                method,
                epsilon: eps_bits.map(f64::from_bits),
                objective: mean_std(&obj),
                mse: mean_std(&mse),
                mean_gain_evals: mean_std(&evals).mean,
            }
        })
        .collect()
}

/// Compares the configured methods on `instances` independent single-step problems.
///
/// With `verify` set, the brute-force oracle and exact curvature are mandatory and
/// the classic and randomized greedy are always run; every failed guarantee counts
/// as a violation.
pub(crate) fn run(cfg: &ExperimentConfig, verify: bool) -> Result<ExperimentOutput, HarnessError> {
    let sched = cfg.scheduler()?;
    let model = cfg.model()?;
    let mut methods = sched.methods.clone();
    if verify {
        for m in [Method::BruteForceOptimal, Method::ClassicGreedy, Method::RandomizedGreedy] {
            if !methods.contains(&m) {
                methods.push(m);
            }
        }
        if sched.epsilons.is_empty() {
            return Err(HarnessError::Config("scheduler.epsilons must be non-empty for verify-theorem1".into()));
        }
    }
    let outcomes: Vec<InstanceOutcome> = (0..cfg.instances)
        .into_par_iter()
        .map(|i| run_instance(cfg, i, &methods, verify))
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    let mut instances = Vec::new();
    for o in outcomes {
        rows.extend(o.rows);
        instances.push(o.summary);
    }
    let card = instances.iter().flat_map(|s| &s.checks).filter(|c| !c.card_satisfied).count();
    let card1 = instances.iter().flat_map(|s| &s.checks).filter(|c| !c.card1_satisfied).count();
    let checked = instances.iter().map(|s| s.checks.len()).sum::<usize>();
    let summary = json!({
        "experiment": cfg.display_name(),
        "kind": cfg.kind.as_str(),
        "mode": if verify { "verify-theorem1" } else { "run" },
        "seed": cfg.seed,
        "m": model.m,
        "n": model.n,
        "k": sched.k,
        "instances": cfg.instances,
        "trials": cfg.trials,
        "groups": group_rows(&rows),
        "per_instance": instances,
        "bound_checks": checked,
        "bound_violations": { "card": card, "card1": card1, "total": card + card1 },
    });
    Ok(ExperimentOutput { rows, summary, violations: card + card1 })
}

/// Runs each method through `horizon` predict/schedule/update cycles.
pub(crate) fn run_multi_step(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let sched = cfg.scheduler()?;
    let model_cfg = cfg.model()?;
    let name = cfg.display_name();
    let all = variants(&sched.methods, &sched.epsilons);

    let per_instance: Vec<Vec<MetricsRow>> = (0..cfg.instances)
        .into_par_iter()
        .map(|instance| {
            let model = build_model(model_cfg, cfg.seed, instance)?;
            let mut rows = Vec::new();
            for v in &all {
                let runs: Vec<Vec<MetricsRow>> = (0..v.runs(cfg.trials))
                    .into_par_iter()
                    .map(|trial| {
                        let run_seed = trial_seed(cfg.seed, instance, v.method, v.eps_idx, trial);
                        let mut p_pred = model.initial_cov().clone();
                        let mut out = Vec::with_capacity(cfg.horizon);
                        for t in 0..cfg.horizon {
                            let inst = SensorInstance::new(p_pred, model.measurement(t)?, model.sigma())?;
                            let step_seed = derive_seed(run_seed, &[t as u64]);
                            let (s, ns) = timed(|| v.schedule(&inst, sched, step_seed));
                            let s = s?;
                            let mut row = MetricsRow::new(&name, v.method.as_str());
                            row.epsilon = v.epsilon;
                            row.seed = v.is_random().then_some(run_seed);
                            row.t = t;
                            row.objective = Some(s.objective);
                            row.mse = Some(s.mse);
                            if v.method == Method::BruteForceOptimal {
                                row.opt_objective = Some(s.objective);
                            }
                            row.gain_evals = Some(s.gain_evals);
                            row.wall_time_ns = ns;
                            row.instance = Some(instance);
                            out.push(row);
                            p_pred = predict_covariance(&s.posterior, &model.transition(t)?, model.sigma())?;
                        }
                        Ok(out)
                    })
                    .collect::<Result<_, HarnessError>>()?;
                rows.extend(runs.into_iter().flatten());
            }
            Ok(rows)
        })
        .collect::<Result<_, HarnessError>>()?;
    let rows: Vec<MetricsRow> = per_instance.into_iter().flatten().collect();

    let groups = group_rows(&rows);
    let trajectories: Vec<_> = groups
        .iter()
        .map(|g| {
            let mse_by_t: Vec<f64> = (0..cfg.horizon)
                .map(|t| {
                    let v: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.t == t && r.method == g.method && r.epsilon == g.epsilon)
                        .filter_map(|r| r.mse)
                        .collect();
                    mean_std(&v).mean
                })
                .collect();
            json!({ "method": g.method, "epsilon": g.epsilon, "mean_mse_by_t": mse_by_t })
        })
        .collect();
    let summary = json!({
        "experiment": name,
        "kind": cfg.kind.as_str(),
        "seed": cfg.seed,
        "m": model_cfg.m,
        "n": model_cfg.n,
        "k": sched.k,
        "horizon": cfg.horizon,
        "instances": cfg.instances,
        "trials": cfg.trials,
        "groups": groups,
        "trajectories": trajectories,
        "bound_violations": { "total": 0 },
    });
    Ok(ExperimentOutput { rows, summary, violations: 0 })
}
