//! Multi-node exchange simulations swept over budget and balance weight.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::config::ExperimentConfig;
use super::metrics::{mean_std, MetricsRow};
use super::{timed, ExperimentOutput, HarnessError};
use crate::network::{simulate_exchange, ExchangeRun};
use crate::rng::derive_seed;

const NETWORK_STREAM: u64 = 4;

/// 1-based ranks with ties sharing their average rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=j] {
            out[p] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; `None` with fewer than two points or a constant input.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

#[derive(Debug, Clone, Serialize)]
struct BudgetComparison {
    budget: usize,
    gamma_low: f64,
    gamma_high: f64,
    runs: usize,
    /// Runs whose final pairwise MSE distance sum is strictly lower at the high weight.
    runs_more_balanced: usize,
    /// Runs whose final total MSE at the low weight is no larger than at the high weight.
    runs_low_total_not_worse: usize,
    /// Mean of `total(γ_high) − total(γ_low)` at the last step.
    mean_total_mse_gap: f64,
    mean_final_per_node_low: Vec<f64>,
    mean_final_per_node_high: Vec<f64>,
}

fn mean_vectors<'a>(vs: impl Iterator<Item = &'a Vec<f64>>) -> Vec<f64> {
    let vs: Vec<&Vec<f64>> = vs.collect();
    let len = vs.first().map_or(0, |v| v.len());
    (0..len).map(|i| vs.iter().map(|v| v[i]).sum::<f64>() / vs.len() as f64).collect()
}

pub(crate) fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let net = cfg
        .network
        .as_ref()
        .ok_or_else(|| HarnessError::Config("[network] is required".into()))?;
    let name = cfg.display_name();
    let combos: Vec<(usize, f64, usize)> = net
        .budgets
        .iter()
        .flat_map(|&b| net.gammas.iter().flat_map(move |&g| (0..cfg.trials).map(move |r| (b, g, r))))
        .collect();
    // one seed per run index, shared across budgets and weights so that they see the same network
    let results: Vec<(ExchangeRun, u64)> = combos
        .par_iter()
        .map(|&(b, g, r)| {
            let (run, ns) = timed(|| simulate_exchange(&net.sim, b, g, derive_seed(cfg.seed, &[NETWORK_STREAM, r as u64])));
            Ok((run?, ns))
        })
        .collect::<Result<_, HarnessError>>()?;

    let mut rows = Vec::new();
    for (run, ns) in &results {
        let per_step_ns = ns / run.steps.len() as u64;
        for step in &run.steps {
            let mut base = MetricsRow::new(&name, "greedy_exchange");
            base.gamma = Some(run.gamma);
            base.seed = Some(run.seed);
            base.t = step.t;
            base.budget = Some(run.budget);
            base.wall_time_ns = per_step_ns;
            let mut total = base.clone();
            total.objective = Some(step.utility);
            total.mse = Some(step.total_mse);
            total.pairwise_mse_distance = Some(step.pairwise_mse_distance_sum);
            rows.push(total);
            for (node, &mse) in step.per_node_mse.iter().enumerate() {
                let mut row = base.clone();
                row.node = Some(node);
                row.mse = Some(mse);
                rows.push(row);
            }
        }
    }

    let gamma_low = net.gammas.iter().copied().fold(f64::INFINITY, f64::min);
    let gamma_high = net.gammas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let final_of = |b: usize, g: f64| -> Vec<&ExchangeRun> {
        results.iter().map(|(r, _)| r).filter(|r| r.budget == b && r.gamma == g).collect()
    };
    let comparisons: Vec<BudgetComparison> = if gamma_high > gamma_low {
        net.budgets
            .iter()
            .map(|&b| {
                let lo = final_of(b, gamma_low);
                let hi = final_of(b, gamma_high);
                let pairs = lo.iter().zip(&hi).map(|(l, h)| (l.last(), h.last()));
                let gaps: Vec<f64> = pairs.clone().map(|(l, h)| h.total_mse - l.total_mse).collect();
                BudgetComparison {
                    budget: b,
                    gamma_low,
                    gamma_high,
                    runs: gaps.len(),
                    runs_more_balanced: pairs
                        .clone()
                        .filter(|(l, h)| h.pairwise_mse_distance_sum < l.pairwise_mse_distance_sum)
                        .count(),
                    runs_low_total_not_worse: pairs.clone().filter(|(l, h)| l.total_mse <= h.total_mse).count(),
                    mean_total_mse_gap: mean_std(&gaps).mean,
                    mean_final_per_node_low: mean_vectors(lo.iter().map(|r| &r.last().per_node_mse)),
                    mean_final_per_node_high: mean_vectors(hi.iter().map(|r| &r.last().per_node_mse)),
                }
            })
            .collect()
    } else {
        Vec::new()
    };
    let budgets: Vec<f64> = comparisons.iter().map(|c| c.budget as f64).collect();
    let gaps: Vec<f64> = comparisons.iter().map(|c| c.mean_total_mse_gap).collect();
    let gap_trend = spearman(&budgets, &gaps);
    // Spearman of the mean final pairwise distance sum against γ, per budget
    let balance_trend: Vec<_> = net
        .budgets
        .iter()
        .map(|&b| {
            let pairwise: Vec<f64> = net
                .gammas
                .iter()
                .map(|&g| {
                    let v: Vec<f64> = final_of(b, g).iter().map(|r| r.last().pairwise_mse_distance_sum).collect();
                    mean_std(&v).mean
                })
                .collect();
            json!({ "budget": b, "mean_final_pairwise": pairwise, "spearman_over_gamma": spearman(&net.gammas, &pairwise) })
        })
        .collect();
    let summary = json!({
        "experiment": name,
        "kind": cfg.kind.as_str(),
        "seed": cfg.seed,
        "sim": net.sim,
        "runs": cfg.trials,
        "budgets": net.budgets,
        "gammas": net.gammas,
        "comparisons": comparisons,
        "gap_spearman_over_budget": gap_trend,
        "balance_over_gamma": balance_trend,
        "bound_violations": { "total": 0 },
    });
    Ok(ExperimentOutput { rows, summary, violations: 0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_small_cases() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[1.0, 5.0, 9.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0], &[4.0, 4.0]), None);
        // ranks (1, 2.5, 2.5) against (1, 2, 3): cov 1.5, var 1.5 and 2
        let r = spearman(&[1.0, 2.0, 3.0], &[0.0, 7.0, 7.0]).unwrap();
        assert!((r - 1.5 / 3f64.sqrt()).abs() < 1e-12);
    }
}
