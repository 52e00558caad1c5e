use itertools::Itertools;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::bounds::sample_size;
use super::fisher::SensorInstance;
use crate::error::{Error, Result};
use crate::linalg::trace;
use crate::rng;
use nalgebra::DMatrix;

/// Default cap on `C(n, k)` for exhaustive search.
pub const DEFAULT_ENUMERATION_CAP: u128 = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    RandomizedGreedy,
    ClassicGreedy,
    RandomUniform,
    BruteForceOptimal,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::RandomizedGreedy => "randomized_greedy",
            Method::ClassicGreedy => "classic_greedy",
            Method::RandomUniform => "random_uniform",
            Method::BruteForceOptimal => "brute_force_optimal",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Sensors chosen for one time step and how they were chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// Selected sensors in the order they were added.
    pub indices: Vec<usize>,
    pub method: Method,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub gain_evals: u64,
    /// `f(S)`.
    pub objective: f64,
    /// `Tr(F_S⁻¹)`.
    pub mse: f64,
    /// `F_S⁻¹`, the filtered covariance under this schedule.
    pub posterior: DMatrix<f64>,
}

impl Schedule {
    pub fn sorted_indices(&self) -> Vec<usize> {
        let mut v = self.indices.clone();
        v.sort_unstable();
        v
    }
}

fn check_budget(instance: &SensorInstance, k: usize) -> Result<()> {
    let n = instance.num_sensors();
    if k == 0 || k > n {
        return Err(Error::InfeasibleBudget { k, n });
    }
    Ok(())
}

/// Shared greedy loop. `pool` picks the candidate positions (into `remaining`)
/// to evaluate each round; `None` means all of them.
fn greedy_loop<F>(instance: &SensorInstance, k: usize, mut pool: F) -> (Vec<usize>, super::FisherState)
where
    F: FnMut(usize) -> Option<Vec<usize>>,
{
    let mut state = instance.empty_state();
    let mut remaining: Vec<usize> = (0..instance.num_sensors()).collect();
    let rows: Vec<_> = (0..instance.num_sensors()).map(|j| instance.row(j)).collect();
    for _ in 0..k {
        let candidates = pool(remaining.len());
        let mut best: Option<(f64, usize, usize)> = None;
        let mut consider = |pos: usize, state: &mut super::FisherState| {
            let j = remaining[pos];
            let gain = state.marginal_gain(&rows[j]);
            let better = match best {
                None => true,
                Some((g, bj, _)) => gain > g || (gain == g && j < bj),
            };
            if better {
                best = Some((gain, j, pos));
            }
        };
        match candidates {
            Some(positions) => positions.into_iter().for_each(|p| consider(p, &mut state)),
            None => (0..remaining.len()).for_each(|p| consider(p, &mut state)),
        }
        let (_, j, pos) = best.expect("candidate pool is never empty");
        remaining.remove(pos);
        state
            .apply_rank_one(j, &rows[j])
            .expect("remaining sensors are never selected twice");
    }
    (state.selected().to_vec(), state)
}

/// Randomized greedy: each of the `k` rounds evaluates `min(s, |[n]∖S|)` sensors drawn
/// uniformly without replacement and keeps the best (ties to the smallest index).
pub fn randomized_greedy(instance: &SensorInstance, k: usize, epsilon: f64, seed: u64) -> Result<Schedule> {
    check_budget(instance, k)?;
    let s = sample_size(instance.num_sensors(), k, epsilon)?;
    let mut r = rng::seeded(seed);
    let (indices, state) = greedy_loop(instance, k, |len| {
        if s >= len {
            None
        } else {
            Some(index::sample(&mut r, len, s).into_vec())
        }
    });
    Ok(Schedule {
        indices,
        method: Method::RandomizedGreedy,
        epsilon: Some(epsilon),
        seed: Some(seed),
        gain_evals: state.gain_evals(),
        objective: state.objective(),
        mse: state.mse(),
        posterior: state.f_inv().clone(),
    })
}

/// Classic greedy: every round scans all unselected sensors.
pub fn classic_greedy(instance: &SensorInstance, k: usize) -> Result<Schedule> {
    check_budget(instance, k)?;
    let (indices, state) = greedy_loop(instance, k, |_| None);
    Ok(Schedule {
        indices,
        method: Method::ClassicGreedy,
        epsilon: None,
        seed: None,
        gain_evals: state.gain_evals(),
        objective: state.objective(),
        mse: state.mse(),
        posterior: state.f_inv().clone(),
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Exhaustive search over all `k`-subsets with direct inversion; ties go to the
/// lexicographically smallest set. `cap` defaults to [`DEFAULT_ENUMERATION_CAP`].
pub fn brute_force_optimal(instance: &SensorInstance, k: usize, cap: Option<u128>) -> Result<Schedule> {
    check_budget(instance, k)?;
    let n = instance.num_sensors();
    let cap = cap.unwrap_or(DEFAULT_ENUMERATION_CAP);
    let count = binomial(n, k);
    if count > cap {
        return Err(Error::InstanceTooLarge { what: "subset enumeration", required: count, cap });
    }
    let mut best: Option<(f64, Vec<usize>, DMatrix<f64>)> = None;
    for subset in (0..n).combinations(k) {
        let post = instance.direct_posterior(&subset)?;
        let value = instance.prior_trace() - trace(&post);
        if best.as_ref().is_none_or(|(b, _, _)| value > *b) {
            best = Some((value, subset, post));
        }
    }
    let (objective, indices, posterior) = best.expect("at least one subset");
    Ok(Schedule {
        indices,
        method: Method::BruteForceOptimal,
        epsilon: None,
        seed: None,
        gain_evals: 0,
        objective,
        mse: trace(&posterior),
        posterior,
    })
}

/// Uniform `k`-subset of `[n]`, sorted.
pub fn random_subset(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 || k > n {
        return Err(Error::InfeasibleBudget { k, n });
    }
    let mut r = rng::seeded(seed);
    let mut v = index::sample(&mut r, n, k).into_vec();
    v.sort_unstable();
    Ok(v)
}

/// Baseline: a uniform random schedule, evaluated by direct inversion.
pub fn random_schedule(instance: &SensorInstance, k: usize, seed: u64) -> Result<Schedule> {
    let indices = random_subset(instance.num_sensors(), k, seed)?;
    let posterior = instance.direct_posterior(&indices)?;
    Ok(Schedule {
        method: Method::RandomUniform,
        epsilon: None,
        seed: Some(seed),
        gain_evals: 0,
        objective: instance.prior_trace() - trace(&posterior),
        mse: trace(&posterior),
        indices,
        posterior,
    })
}
