//! Balanced measurement exchange among sensing nodes through a relay.
//!
//! Node `i` holds local observation rows `H_i` (the set `L_i`), noise level `σ_i`
//! and Fisher matrix `F_i`. The relay schedules triplets `(dst, src, meas)`,
//! each delivering row `meas` of `H_src` to node `dst`, maximizing
//!
//! ```text
//! u(S) = f(S) + γ g(S)
//! f(S) = Σ_i Tr(F_i⁻¹) − Tr((F_i + Σ_{(i,j,k)∈S} σ_j⁻² h_{j_k} h_{j_k}ᵀ)⁻¹)
//! g(S) = Σ_i log(1 + |O_i| / |L_i|)
//! ```
//!
//! under `|S| ≤ K`, where `|O_i|` counts the measurements delivered to node `i`.

mod greedy;
mod sim;

use std::collections::HashSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, symmetrize, trace, validate_spd, SPD_TOLERANCE};
use crate::scheduler::closed_form_gain;

pub use greedy::{
    brute_force_exchange, exact_utility_curvature, greedy_exchange, proposition1_bound,
    ExchangeSchedule, Proposition1Report,
};
pub use sim::{
    selection_matrix, simulate_exchange, ExchangeRun, ExchangeSimConfig, ExchangeStep,
};

/// One sensing node.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeNode {
    /// Local observation rows `h_{i_k}`, one per local measurement.
    pub observations: DMatrix<f64>,
    pub sigma: f64,
    /// `F_{i,t}⁻¹`: the node's covariance after its own local measurements.
    pub fisher_inv: DMatrix<f64>,
}

impl ExchangeNode {
    pub fn local_size(&self) -> usize {
        self.observations.nrows()
    }

    pub fn row(&self, k: usize) -> DVector<f64> {
        self.observations.row(k).transpose()
    }
}

/// Multi-node model at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeNetwork {
    nodes: Vec<ExchangeNode>,
    dynamics: DMatrix<f64>,
    process_cov: DMatrix<f64>,
}

/// Delivery of source node `src`'s local measurement `meas` to node `dst` (all zero-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ExchangeTriplet {
    pub dst: usize,
    pub src: usize,
    pub meas: usize,
}

impl ExchangeTriplet {
    pub fn new(dst: usize, src: usize, meas: usize) -> Self {
        Self { dst, src, meas }
    }
}

impl fmt::Display for ExchangeTriplet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.dst, self.src, self.meas)
    }
}

impl ExchangeNetwork {
    pub fn new(
        nodes: Vec<ExchangeNode>,
        dynamics: DMatrix<f64>,
        process_cov: DMatrix<f64>,
    ) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::InvalidModel("an exchange network needs at least two nodes".into()));
        }
        let dim = dynamics.nrows();
        if !dynamics.is_square() || process_cov.shape() != (dim, dim) {
            return Err(Error::DimensionMismatch(
                "dynamics and process covariance must be square and of equal size".into(),
            ));
        }
        let process_cov = validate_spd(&process_cov, SPD_TOLERANCE)?;
        let mut checked = Vec::with_capacity(nodes.len());
        for (i, node) in nodes.into_iter().enumerate() {
            if node.local_size() == 0 {
                return Err(Error::InvalidModel(format!("node {i} has no local measurements")));
            }
            if node.observations.ncols() != dim || node.fisher_inv.shape() != (dim, dim) {
                return Err(Error::DimensionMismatch(format!("node {i} does not match state dimension {dim}")));
            }
            if !(node.sigma > 0.0 && node.sigma.is_finite()) {
                return Err(Error::InvalidModel(format!("node {i} has non-positive sigma")));
            }
            let fisher_inv = validate_spd(&node.fisher_inv, SPD_TOLERANCE)?;
            checked.push(ExchangeNode { fisher_inv, ..node });
        }
        Ok(Self { nodes: checked, dynamics, process_cov })
    }

    /// Builds each `F_i = P_{i}⁻¹ + σ_i⁻² H_iᵀ H_i` from the nodes' prediction covariances.
    pub fn from_priors(
        priors: &[DMatrix<f64>],
        observations: Vec<DMatrix<f64>>,
        sigmas: &[f64],
        dynamics: DMatrix<f64>,
        process_cov: DMatrix<f64>,
    ) -> Result<Self> {
        if priors.len() != observations.len() || sigmas.len() != observations.len() {
            return Err(Error::DimensionMismatch("one prior, observation matrix and sigma per node".into()));
        }
        let nodes = priors
            .iter()
            .zip(observations)
            .zip(sigmas)
            .map(|((prior, obs), &sigma)| {
                let prior = validate_spd(prior, SPD_TOLERANCE)?;
                if obs.ncols() != prior.nrows() {
                    return Err(Error::DimensionMismatch("observation width differs from prior size".into()));
                }
                let info = spd_inverse(&prior)? + obs.transpose() * &obs / (sigma * sigma);
                Ok(ExchangeNode { fisher_inv: spd_inverse(&symmetrize(&info))?, observations: obs, sigma })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(nodes, dynamics, process_cov)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn state_dim(&self) -> usize {
        self.dynamics.nrows()
    }

    pub fn nodes(&self) -> &[ExchangeNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &ExchangeNode {
        &self.nodes[i]
    }

    pub fn dynamics(&self) -> &DMatrix<f64> {
        &self.dynamics
    }

    pub fn process_cov(&self) -> &DMatrix<f64> {
        &self.process_cov
    }

    pub fn local_sizes(&self) -> Vec<usize> {
        self.nodes.iter().map(ExchangeNode::local_size).collect()
    }

    /// `Σ_i Tr(F_i⁻¹)`: the network MSE before any exchange.
    pub fn base_mse(&self) -> f64 {
        self.nodes.iter().map(|n| trace(&n.fisher_inv)).sum()
    }

    pub fn check_triplet(&self, t: &ExchangeTriplet) -> Result<()> {
        let m = self.num_nodes();
        if t.dst >= m || t.src >= m || t.dst == t.src || t.meas >= self.nodes[t.src].local_size() {
            return Err(Error::InvalidTriplet(format!(
                "{t} is not admissible in a {m}-node network"
            )));
        }
        Ok(())
    }

    /// Every admissible triplet, in lexicographic `(dst, src, meas)` order.
    pub fn admissible_triplets(&self) -> Vec<ExchangeTriplet> {
        let m = self.num_nodes();
        let mut out = Vec::new();
        for dst in 0..m {
            for src in (0..m).filter(|&s| s != dst) {
                for meas in 0..self.nodes[src].local_size() {
                    out.push(ExchangeTriplet { dst, src, meas });
                }
            }
        }
        out
    }

    /// Node `dst`'s covariance after receiving `received` (those with `dst` as destination),
    /// by direct inversion.
    pub fn direct_posterior(&self, dst: usize, received: &[ExchangeTriplet]) -> Result<DMatrix<f64>> {
        let mut info = spd_inverse(&self.nodes[dst].fisher_inv)?;
        let mut any = false;
        for t in received.iter().filter(|t| t.dst == dst) {
            self.check_triplet(t)?;
            let src = &self.nodes[t.src];
            let h = src.row(t.meas);
            info.ger(1.0 / (src.sigma * src.sigma), &h, &h, 1.0);
            any = true;
        }
        if !any {
            return Ok(self.nodes[dst].fisher_inv.clone());
        }
        spd_inverse(&symmetrize(&info))
    }

    /// `u(S)` computed from scratch.
    pub fn utility(&self, selected: &[ExchangeTriplet], gamma: f64) -> Result<f64> {
        let unique: HashSet<_> = selected.iter().collect();
        if unique.len() != selected.len() {
            return Err(Error::InvalidTriplet("duplicate triplet in selection".into()));
        }
        let mut received = vec![0usize; self.num_nodes()];
        let mut f = 0.0;
        for dst in 0..self.num_nodes() {
            f += trace(&self.nodes[dst].fisher_inv) - trace(&self.direct_posterior(dst, selected)?);
        }
        for t in selected {
            received[t.dst] += 1;
        }
        Ok(f + gamma * balance_regularizer(&received, &self.local_sizes()))
    }

    /// Working state with `S = ∅`.
    pub fn start(&self) -> ExchangeState<'_> {
        ExchangeState {
            network: self,
            fisher_inv: self.nodes.iter().map(|n| n.fisher_inv.clone()).collect(),
            received: vec![0; self.num_nodes()],
            selected: Vec::new(),
            selected_set: HashSet::new(),
        }
    }

    /// The next step's network: each node predicts from `posteriors[i]` with
    /// `P = A P Aᵀ + Q` and then folds in its local measurements again.
    pub fn advance(&self, posteriors: &[DMatrix<f64>]) -> Result<Self> {
        if posteriors.len() != self.num_nodes() {
            return Err(Error::DimensionMismatch("one posterior per node".into()));
        }
        let priors: Vec<_> = posteriors
            .iter()
            .map(|p| symmetrize(&(&self.dynamics * p * self.dynamics.transpose() + &self.process_cov)))
            .collect();
        let obs = self.nodes.iter().map(|n| n.observations.clone()).collect();
        let sigmas: Vec<_> = self.nodes.iter().map(|n| n.sigma).collect();
        Self::from_priors(&priors, obs, &sigmas, self.dynamics.clone(), self.process_cov.clone())
    }
}

/// `g(S) = Σ_i log(1 + |O_i| / |L_i|)`.
pub fn balance_regularizer(received: &[usize], local_sizes: &[usize]) -> f64 {
    received
        .iter()
        .zip(local_sizes)
        .map(|(&o, &l)| (o as f64 / l as f64).ln_1p())
        .sum()
}

/// `log(1 + 1/(|O_dst| + |L_dst|))`: the gain in `g` from one more delivery to `dst`,
/// whatever the source or measurement.
pub fn g_marginal(received: &[usize], local_sizes: &[usize], dst: usize) -> f64 {
    (1.0 / (received[dst] + local_sizes[dst]) as f64).ln_1p()
}

/// Total and pairwise-distance balance summary of per-node MSEs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BalanceMetrics {
    pub total_mse: f64,
    pub pairwise_mse_distance_sum: f64,
}

pub fn balance_metrics(per_node_mse: &[f64]) -> BalanceMetrics {
    let mut pairwise = 0.0;
    for (i, a) in per_node_mse.iter().enumerate() {
        for b in &per_node_mse[i + 1..] {
            pairwise += (a - b).abs();
        }
    }
    BalanceMetrics { total_mse: per_node_mse.iter().sum(), pairwise_mse_distance_sum: pairwise }
}

/// Selection in progress: per-node `F_{i,S}⁻¹` and receive counts.
#[derive(Debug, Clone)]
pub struct ExchangeState<'a> {
    network: &'a ExchangeNetwork,
    fisher_inv: Vec<DMatrix<f64>>,
    received: Vec<usize>,
    selected: Vec<ExchangeTriplet>,
    selected_set: HashSet<ExchangeTriplet>,
}

impl<'a> ExchangeState<'a> {
    pub fn network(&self) -> &'a ExchangeNetwork {
        self.network
    }

    pub fn selected(&self) -> &[ExchangeTriplet] {
        &self.selected
    }

    pub fn received(&self) -> &[usize] {
        &self.received
    }

    pub fn fisher_inv(&self, node: usize) -> &DMatrix<f64> {
        &self.fisher_inv[node]
    }

    pub fn contains(&self, t: &ExchangeTriplet) -> bool {
        self.selected_set.contains(t)
    }

    fn check_new(&self, t: &ExchangeTriplet) -> Result<()> {
        self.network.check_triplet(t)?;
        if self.contains(t) {
            return Err(Error::InvalidTriplet(format!("{t} is already scheduled")));
        }
        Ok(())
    }

    /// `hᵀF_{dst,S}⁻² h / (σ_src² + hᵀ F_{dst,S}⁻¹ h)` for `h` the delivered row.
    pub fn f_marginal(&self, t: &ExchangeTriplet) -> Result<f64> {
        self.check_new(t)?;
        let src = self.network.node(t.src);
        Ok(closed_form_gain(&self.fisher_inv[t.dst], &src.row(t.meas), src.sigma))
    }

    pub fn g_marginal(&self, t: &ExchangeTriplet) -> Result<f64> {
        self.check_new(t)?;
        Ok(g_marginal(&self.received, &self.network.local_sizes(), t.dst))
    }

    /// `u_t(S) = f_t(S) + γ g_t(S)`.
    pub fn utility_marginal(&self, t: &ExchangeTriplet, gamma: f64) -> Result<f64> {
        Ok(self.f_marginal(t)? + gamma * self.g_marginal(t)?)
    }

    /// Schedules `t`: rank-one update of `F_dst⁻¹` and one more receive at `dst`.
    pub fn apply(&mut self, t: ExchangeTriplet) -> Result<()> {
        self.check_new(&t)?;
        let src = self.network.node(t.src);
        let h = src.row(t.meas);
        let f_inv = &mut self.fisher_inv[t.dst];
        let v = &*f_inv * &h;
        let denom = src.sigma * src.sigma + h.dot(&v);
        f_inv.ger(-1.0 / denom, &v, &v, 1.0);
        *f_inv = symmetrize(f_inv);
        self.received[t.dst] += 1;
        self.selected.push(t);
        self.selected_set.insert(t);
        Ok(())
    }

    pub fn per_node_mse(&self) -> Vec<f64> {
        self.fisher_inv.iter().map(trace).collect()
    }

    /// `f(S)` from the maintained inverses.
    pub fn objective(&self) -> f64 {
        self.network.base_mse() - self.per_node_mse().iter().sum::<f64>()
    }

    pub fn utility(&self, gamma: f64) -> f64 {
        self.objective() + gamma * balance_regularizer(&self.received, &self.network.local_sizes())
    }

    pub fn into_posteriors(self) -> Vec<DMatrix<f64>> {
        self.fisher_inv
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::linalg::relative_err;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Random network with dense observation rows.
    pub(crate) fn random_network(seed: u64, dim: usize, locals: &[usize], sigmas: &[f64]) -> ExchangeNetwork {
        let mut r = rng::seeded(seed);
        let priors: Vec<_> = locals
            .iter()
            .map(|_| {
                let b = DMatrix::<f64>::from_fn(dim, dim, |_, _| r.sample(StandardNormal));
                &b * b.transpose() / dim as f64 + DMatrix::identity(dim, dim) * 0.5
            })
            .collect();
        let obs = locals
            .iter()
            .map(|&l| DMatrix::<f64>::from_fn(l, dim, |_, _| r.sample(StandardNormal)))
            .collect();
        ExchangeNetwork::from_priors(
            &priors,
            obs,
            sigmas,
            DMatrix::identity(dim, dim) * 0.8,
            DMatrix::identity(dim, dim) * 0.2,
        )
        .unwrap()
    }

    #[test]
    fn g_marginal_examples() {
        assert!((g_marginal(&[0], &[1], 0) - 2f64.ln()).abs() < 1e-15);
        assert!((g_marginal(&[3], &[5], 0) - (1.125f64).ln()).abs() < 1e-15);
        assert!((g_marginal(&[3], &[5], 0) - 0.1178).abs() < 1e-4);
        let net = random_network(1, 3, &[2, 3, 1], &[0.5, 0.5, 0.5]);
        let st = net.start();
        let a = st.g_marginal(&ExchangeTriplet::new(0, 1, 2)).unwrap();
        let b = st.g_marginal(&ExchangeTriplet::new(0, 2, 0)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn g_marginal_matches_difference_and_decreases() {
        let locals = [2, 5, 1];
        for o in 0..20usize {
            let before = [o, 0, 0];
            let after = [o + 1, 0, 0];
            let diff = balance_regularizer(&after, &locals) - balance_regularizer(&before, &locals);
            assert!(relative_err(diff, g_marginal(&before, &locals, 0)) < 1e-12);
            assert!(g_marginal(&after, &locals, 0) < g_marginal(&before, &locals, 0));
        }
    }

    #[test]
    fn f_marginal_matches_direct_difference() {
        let net = random_network(2, 4, &[3, 2, 2], &[0.4, 0.7, 1.1]);
        let mut st = net.start();
        let all = net.admissible_triplets();
        for step in 0..4 {
            let u0 = net.utility(st.selected(), 0.0).unwrap();
            for t in all.iter().filter(|t| !st.contains(t)) {
                let mut sel = st.selected().to_vec();
                sel.push(*t);
                let direct = net.utility(&sel, 0.0).unwrap() - u0;
                assert!(relative_err(st.f_marginal(t).unwrap(), direct) < 1e-8);
            }
            st.apply(all[step * 3]).unwrap();
        }
    }

    #[test]
    fn f_marginal_matches_scheduler_gain() {
        use crate::scheduler::SensorInstance;
        let net = random_network(3, 3, &[2, 4], &[0.9, 0.6]);
        let prior = net.node(0).fisher_inv.clone();
        let inst = SensorInstance::new(prior, net.node(1).observations.clone(), 0.6).unwrap();
        let st = net.start();
        for k in 0..4 {
            let mut fs = inst.empty_state();
            let a = fs.marginal_gain(&inst.row(k));
            let b = st.f_marginal(&ExchangeTriplet::new(0, 1, k)).unwrap();
            assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn zero_row_and_pure_balance_term() {
        let mut net = random_network(4, 2, &[1, 1], &[1.0, 1.0]);
        net.nodes[1].observations = DMatrix::zeros(1, 2);
        let st = net.start();
        let t = ExchangeTriplet::new(0, 1, 0);
        assert_eq!(st.f_marginal(&t).unwrap(), 0.0);
        assert!((st.utility_marginal(&t, 1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn utility_marginal_is_additive() {
        let net = random_network(5, 4, &[3, 3, 2], &[0.3, 0.3, 0.3]);
        let st = net.start();
        for t in net.admissible_triplets() {
            let u = st.utility_marginal(&t, 200.0).unwrap();
            let f = st.f_marginal(&t).unwrap();
            let g = st.g_marginal(&t).unwrap();
            assert!((u - (f + 200.0 * g)).abs() <= 1e-12 * u.abs());
            assert_eq!(st.utility_marginal(&t, 0.0).unwrap(), f);
        }
    }

    #[test]
    fn inadmissible_triplets_rejected() {
        let net = random_network(6, 2, &[2, 1], &[1.0, 1.0]);
        let mut st = net.start();
        assert!(st.f_marginal(&ExchangeTriplet::new(0, 0, 0)).is_err());
        assert!(st.f_marginal(&ExchangeTriplet::new(0, 1, 1)).is_err());
        assert!(st.f_marginal(&ExchangeTriplet::new(5, 1, 0)).is_err());
        st.apply(ExchangeTriplet::new(0, 1, 0)).unwrap();
        assert!(matches!(st.apply(ExchangeTriplet::new(0, 1, 0)), Err(Error::InvalidTriplet(_))));
    }

    #[test]
    fn empty_utility_is_zero_and_triplets_enumerated() {
        let net = random_network(7, 3, &[2, 3, 1], &[1.0, 1.0, 1.0]);
        assert_eq!(net.utility(&[], 5.0).unwrap(), 0.0);
        assert_eq!(net.start().utility(5.0), 0.0);
        let all = net.admissible_triplets();
        // node 0 receives 3 + 1, node 1 receives 2 + 1, node 2 receives 2 + 3
        assert_eq!(all.len(), 12);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn balance_metrics_examples() {
        let b = balance_metrics(&[1.0, 2.0, 4.0]);
        assert_eq!(b.total_mse, 7.0);
        assert_eq!(b.pairwise_mse_distance_sum, 6.0);
        assert_eq!(balance_metrics(&[3.0, 3.0, 3.0]).pairwise_mse_distance_sum, 0.0);
    }

    #[test]
    fn network_validation() {
        let ok = random_network(8, 2, &[1, 1], &[1.0, 1.0]);
        let mut nodes = ok.nodes().to_vec();
        nodes[0].observations = DMatrix::zeros(0, 2);
        assert!(ExchangeNetwork::new(nodes, ok.dynamics.clone(), ok.process_cov.clone()).is_err());
        let single = vec![ok.node(0).clone()];
        assert!(ExchangeNetwork::new(single, ok.dynamics.clone(), ok.process_cov.clone()).is_err());
    }
}
