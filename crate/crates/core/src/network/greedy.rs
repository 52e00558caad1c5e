use itertools::Itertools;
use nalgebra::DMatrix;
use serde::Serialize;

use super::{g_marginal, ExchangeNetwork, ExchangeTriplet};
use crate::curvature::{exact_set_curvature, CurvatureReport};
use crate::error::{Error, Result};
use crate::linalg::eigen_extremes;
use crate::scheduler::closed_form_gain;

/// Result of one round of exchange scheduling.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeSchedule {
    /// Selected triplets in selection order.
    pub triplets: Vec<ExchangeTriplet>,
    pub gamma: f64,
    pub budget: usize,
    /// `u(S)`.
    pub utility: f64,
    /// `Tr(F_{i,S}⁻¹)` per node.
    pub per_node_mse: Vec<f64>,
    /// `|O_i|` per node.
    pub received: Vec<usize>,
    /// Set when the budget exceeded the number of admissible triplets.
    pub truncated: bool,
    /// `F_{i,S}⁻¹` per node.
    pub posteriors: Vec<DMatrix<f64>>,
}

/// Greedy exchange: `K` rounds, each scheduling the admissible triplet with the
/// largest `u`-marginal (ties to the lexicographically smallest `(dst, src, meas)`).
///
/// `_seed` is accepted for symmetry with the randomized scheduler; the algorithm is
/// deterministic.
pub fn greedy_exchange(
    network: &ExchangeNetwork,
    budget: usize,
    gamma: f64,
    _seed: Option<u64>,
) -> Result<ExchangeSchedule> {
    if budget == 0 {
        return Err(Error::InvalidParams("exchange budget K must be at least 1".into()));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParams(format!("gamma must be finite and non-negative, got {gamma}")));
    }
    let all = network.admissible_triplets();
    if all.is_empty() {
        return Err(Error::InvalidParams("no admissible triplets".into()));
    }
    let local_sizes = network.local_sizes();
    let rows: Vec<Vec<_>> = network
        .nodes()
        .iter()
        .map(|n| (0..n.local_size()).map(|k| n.row(k)).collect())
        .collect();
    let mut state = network.start();
    let f_gain = |state: &super::ExchangeState<'_>, t: &ExchangeTriplet| {
        let src = network.node(t.src);
        closed_form_gain(state.fisher_inv(t.dst), &rows[t.src][t.meas], src.sigma)
    };
    // f-marginals only change for triplets whose destination was just updated
    let mut cache: Vec<f64> = all.iter().map(|t| f_gain(&state, t)).collect();
    let mut taken = vec![false; all.len()];
    let rounds = budget.min(all.len());
    for _ in 0..rounds {
        let mut best: Option<(f64, usize)> = None;
        for (pos, t) in all.iter().enumerate() {
            if taken[pos] {
                continue;
            }
            let u = cache[pos] + gamma * g_marginal(state.received(), &local_sizes, t.dst);
            if best.is_none_or(|(b, _)| u > b) {
                best = Some((u, pos));
            }
        }
        let (_, pos) = best.expect("rounds never exceed the admissible count");
        taken[pos] = true;
        let chosen = all[pos];
        state.apply(chosen)?;
        for (p, t) in all.iter().enumerate() {
            if !taken[p] && t.dst == chosen.dst {
                cache[p] = f_gain(&state, t);
            }
        }
    }
    Ok(ExchangeSchedule {
        triplets: state.selected().to_vec(),
        gamma,
        budget,
        utility: state.utility(gamma),
        per_node_mse: state.per_node_mse(),
        received: state.received().to_vec(),
        truncated: budget > all.len(),
        posteriors: state.into_posteriors(),
    })
}

/// Exhaustive search over all `min(K, N)`-subsets of the `N` admissible triplets.
/// Ties go to the lexicographically first subset.
pub fn brute_force_exchange(
    network: &ExchangeNetwork,
    budget: usize,
    gamma: f64,
    cap: u128,
) -> Result<(Vec<ExchangeTriplet>, f64)> {
    let all = network.admissible_triplets();
    let k = budget.min(all.len());
    let count = (0..k).fold(1u128, |acc, i| acc * (all.len() - i) as u128 / (i + 1) as u128);
    if count > cap {
        return Err(Error::InstanceTooLarge { what: "triplet enumeration", required: count, cap });
    }
    let mut best: Option<(f64, Vec<ExchangeTriplet>)> = None;
    for combo in all.iter().copied().combinations(k) {
        let u = network.utility(&combo, gamma)?;
        if best.as_ref().is_none_or(|(b, _)| u > *b) {
            best = Some((u, combo));
        }
    }
    let (u, s) = best.expect("at least one subset");
    Ok((s, u))
}

/// Exact element-wise curvature of `u` over the admissible triplets.
pub fn exact_utility_curvature(
    network: &ExchangeNetwork,
    gamma: f64,
    cap: Option<usize>,
) -> Result<CurvatureReport> {
    let ground = network.admissible_triplets();
    let local_sizes = network.local_sizes();
    exact_set_curvature(ground.len(), cap, |mask, e| {
        let t = ground[e];
        let sel: Vec<_> = (0..ground.len()).filter(|&b| mask & (1 << b) != 0).map(|b| ground[b]).collect();
        let post = network.direct_posterior(t.dst, &sel)?;
        let src = network.node(t.src);
        let mut received = vec![0usize; network.num_nodes()];
        sel.iter().for_each(|s| received[s.dst] += 1);
        Ok(closed_form_gain(&post, &src.row(t.meas), src.sigma)
            + gamma * g_marginal(&received, &local_sizes, t.dst))
    })
}

/// Evaluation of the closed-form curvature bound for the exchange objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Proposition1Report {
    /// `σ⁻² λ_max(Hᵀ H) ≤ λ_M` for the stacked observation matrix `H`.
    pub condition_holds: bool,
    /// `(2 λ_M / λ_m)³`; only meaningful when the condition holds.
    pub bound: f64,
    pub lambda_max_fisher: f64,
    pub lambda_min_fisher: f64,
    pub stacked_spectral: f64,
}

/// `λ_M = max_i λ_max(F_i)`, `λ_m = min_i λ_min(F_i)`; requires a common noise level.
pub fn proposition1_bound(network: &ExchangeNetwork) -> Result<Proposition1Report> {
    let sigma = network.node(0).sigma;
    if network.nodes().iter().any(|n| n.sigma != sigma) {
        return Err(Error::InvalidParams("the curvature bound assumes a common sigma across nodes".into()));
    }
    let mut lambda_max_fisher = f64::NEG_INFINITY;
    let mut lambda_min_fisher = f64::INFINITY;
    let dim = network.state_dim();
    let mut gram = DMatrix::zeros(dim, dim);
    for node in network.nodes() {
        let (cov_min, cov_max) = eigen_extremes(&node.fisher_inv);
        lambda_max_fisher = lambda_max_fisher.max(1.0 / cov_min);
        lambda_min_fisher = lambda_min_fisher.min(1.0 / cov_max);
        gram += node.observations.transpose() * &node.observations;
    }
    let stacked_spectral = eigen_extremes(&gram).1 / (sigma * sigma);
    Ok(Proposition1Report {
        condition_holds: stacked_spectral <= lambda_max_fisher,
        bound: (2.0 * lambda_max_fisher / lambda_min_fisher).powi(3),
        lambda_max_fisher,
        lambda_min_fisher,
        stacked_spectral,
    })
}

#[cfg(test)]
mod tests {
    use super::super::tests::random_network;
    use super::*;
    use crate::linalg::{relative_diff, relative_err, spd_inverse};

    #[test]
    fn greedy_utility_matches_recomputation() {
        let net = random_network(11, 4, &[3, 2, 4], &[0.5, 0.8, 0.6]);
        for gamma in [0.0, 1.0, 200.0] {
            let s = greedy_exchange(&net, 5, gamma, None).unwrap();
            assert_eq!(s.triplets.len(), 5);
            let direct = net.utility(&s.triplets, gamma).unwrap();
            assert!(relative_err(s.utility, direct) < 1e-8);
            for (i, p) in s.posteriors.iter().enumerate() {
                assert!(relative_diff(p, &net.direct_posterior(i, &s.triplets).unwrap()) < 1e-8);
            }
        }
    }

    #[test]
    fn marginals_stay_positive() {
        let net = random_network(12, 3, &[2, 2, 3], &[0.5, 0.5, 0.5]);
        let mut st = net.start();
        let s = greedy_exchange(&net, 6, 0.5, None).unwrap();
        for t in &s.triplets {
            assert!(st.utility_marginal(t, 0.5).unwrap() > 0.0);
            st.apply(*t).unwrap();
        }
    }

    #[test]
    fn saturation_shares_everything() {
        let net = random_network(13, 3, &[2, 1, 2], &[0.4, 0.9, 0.6]);
        let total = net.admissible_triplets().len();
        let s = greedy_exchange(&net, total + 3, 1.0, None).unwrap();
        assert!(s.truncated);
        assert_eq!(s.triplets.len(), total);
        for i in 0..net.num_nodes() {
            let mut info = spd_inverse(&net.node(i).fisher_inv).unwrap();
            for j in (0..net.num_nodes()).filter(|&j| j != i) {
                let n = net.node(j);
                info += n.observations.transpose() * &n.observations / (n.sigma * n.sigma);
            }
            let expected = spd_inverse(&info).unwrap();
            assert!(relative_diff(&s.posteriors[i], &expected) < 1e-8);
        }
    }

    #[test]
    fn huge_gamma_follows_balance_term() {
        let net = random_network(14, 3, &[4, 1, 2], &[0.5, 0.5, 0.5]);
        let s = greedy_exchange(&net, 8, 1e12, None).unwrap();
        let sizes = net.local_sizes();
        let all = net.admissible_triplets();
        let mut received = vec![0usize; 3];
        let mut used = std::collections::HashSet::new();
        for t in &s.triplets {
            // destinations that still have something to receive
            let open: Vec<usize> = (0..3)
                .filter(|&d| all.iter().any(|a| a.dst == d && !used.contains(a)))
                .collect();
            let least = open.iter().map(|&d| received[d] + sizes[d]).min().unwrap();
            assert_eq!(received[t.dst] + sizes[t.dst], least);
            received[t.dst] += 1;
            used.insert(*t);
        }
    }

    #[test]
    fn toy_greedy_with_zero_gamma_against_enumeration() {
        // two nodes, two measurements each, K = 2
        for seed in 0..20 {
            let net = random_network(100 + seed, 3, &[2, 2], &[0.5, 0.5]);
            let g = greedy_exchange(&net, 2, 0.0, None).unwrap();
            let (_, best) = brute_force_exchange(&net, 2, 0.0, 1_000_000).unwrap();
            assert!(g.utility <= best + 1e-12);
            let c = exact_utility_curvature(&net, 0.0, Some(12)).unwrap().c_effective;
            assert!(g.utility >= (1.0 - (-1.0 / c).exp()) * best);
        }
    }

    #[test]
    fn budget_validation() {
        let net = random_network(15, 2, &[1, 1], &[1.0, 1.0]);
        assert!(greedy_exchange(&net, 0, 1.0, None).is_err());
        assert!(greedy_exchange(&net, 1, -1.0, None).is_err());
    }

    #[test]
    fn proposition1_identity_case() {
        // F_i = λ I for every node gives λ_M = λ_m, bound 8
        let lam = 4.0;
        let obs = vec![DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), DMatrix::from_row_slice(1, 2, &[0.0, 1.0])];
        let nodes = obs
            .into_iter()
            .map(|o| super::super::ExchangeNode { observations: o, sigma: 1.0, fisher_inv: DMatrix::identity(2, 2) / lam })
            .collect();
        let net = ExchangeNetwork::new(nodes, DMatrix::identity(2, 2), DMatrix::identity(2, 2)).unwrap();
        let rep = proposition1_bound(&net).unwrap();
        assert!(rep.condition_holds);
        assert!((rep.bound - 8.0).abs() < 1e-9);
    }

    #[test]
    fn proposition1_cube_and_sigma_check() {
        assert_eq!((2.0f64 * 4.0 / 1.0).powi(3), 512.0);
        let net = random_network(16, 2, &[1, 1], &[1.0, 0.5]);
        assert!(proposition1_bound(&net).is_err());
    }

    #[test]
    fn proposition1_bounds_exact_curvature() {
        let mut checked = 0;
        for seed in 0..30 {
            let net = random_network(200 + seed, 3, &[2, 1, 1], &[0.7, 0.7, 0.7]);
            let rep = proposition1_bound(&net).unwrap();
            if rep.condition_holds {
                let c = exact_utility_curvature(&net, 0.0, Some(12)).unwrap();
                assert!(c.c_max <= rep.bound * (1.0 + 1e-9), "{} > {}", c.c_max, rep.bound);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }
}
