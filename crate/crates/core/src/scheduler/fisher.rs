use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{gram_of_rows, spd_inverse, symmetrize, trace, validate_spd, SPD_TOLERANCE};

/// A single-step scheduling problem: prior covariance `P_{t|t-1}`, the `n × m`
/// measurement matrix and the common noise level `σ`.
#[derive(Debug, Clone)]
pub struct SensorInstance {
    prior: DMatrix<f64>,
    prior_inv: DMatrix<f64>,
    rows: DMatrix<f64>,
    sigma: f64,
}

impl SensorInstance {
    pub fn new(prior: DMatrix<f64>, rows: DMatrix<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidModel(format!("sigma must be positive, got {sigma}")));
        }
        let prior = validate_spd(&prior, SPD_TOLERANCE)?;
        if rows.ncols() != prior.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "measurement rows have length {}, state dimension is {}",
                rows.ncols(),
                prior.nrows()
            )));
        }
        if rows.nrows() == 0 {
            return Err(Error::InvalidModel("at least one sensor is required".into()));
        }
        let prior_inv = spd_inverse(&prior)?;
        Ok(Self { prior, prior_inv, rows, sigma })
    }

    pub fn num_sensors(&self) -> usize {
        self.rows.nrows()
    }

    pub fn state_dim(&self) -> usize {
        self.prior.nrows()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn prior(&self) -> &DMatrix<f64> {
        &self.prior
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn row(&self, j: usize) -> DVector<f64> {
        self.rows.row(j).transpose()
    }

    pub fn prior_trace(&self) -> f64 {
        trace(&self.prior)
    }

    /// `F_S⁻¹` by forming the Fisher matrix and inverting it.
    pub fn direct_posterior(&self, selected: &[usize]) -> Result<DMatrix<f64>> {
        self.check_indices(selected)?;
        if selected.is_empty() {
            return Ok(self.prior.clone());
        }
        let info = &self.prior_inv + gram_of_rows(&self.rows, selected) / (self.sigma * self.sigma);
        spd_inverse(&symmetrize(&info))
    }

    /// `f(S)` through [`Self::direct_posterior`].
    pub fn direct_objective(&self, selected: &[usize]) -> Result<f64> {
        Ok(self.prior_trace() - trace(&self.direct_posterior(selected)?))
    }

    /// Fisher state for `S = ∅` (`F⁻¹ = P_{t|t-1}`).
    pub fn empty_state(&self) -> FisherState {
        FisherState {
            selected: Vec::new(),
            f_inv: self.prior.clone(),
            sigma: self.sigma,
            prior_trace: self.prior_trace(),
            gain_evals: 0,
        }
    }

    fn check_indices(&self, selected: &[usize]) -> Result<()> {
        let n = self.num_sensors();
        let mut seen = vec![false; n];
        for &i in selected {
            if i >= n {
                return Err(Error::InvalidParams(format!("sensor index {i} out of range (n = {n})")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(Error::DuplicateSelection(i));
            }
        }
        Ok(())
    }
}

/// `a_jᵀ F⁻² a_j / (σ² + a_jᵀ F⁻¹ a_j)`: the gain in `f` from adding a sensor with row `a_j`.
pub fn closed_form_gain(f_inv: &DMatrix<f64>, a: &DVector<f64>, sigma: f64) -> f64 {
    let v = f_inv * a;
    v.norm_squared() / (sigma * sigma + a.dot(&v))
}

/// Selected set plus the incrementally maintained `F_S⁻¹`.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherState {
    selected: Vec<usize>,
    f_inv: DMatrix<f64>,
    sigma: f64,
    prior_trace: f64,
    gain_evals: u64,
}

impl FisherState {
    /// Empty selection over prior covariance `prior`.
    pub fn new(prior: &DMatrix<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidModel(format!("sigma must be positive, got {sigma}")));
        }
        let prior = validate_spd(prior, SPD_TOLERANCE)?;
        Ok(Self {
            selected: Vec::new(),
            prior_trace: trace(&prior),
            f_inv: prior,
            sigma,
            gain_evals: 0,
        })
    }

    /// State for an arbitrary selection, built by direct inversion.
    pub fn from_selection(instance: &SensorInstance, selected: &[usize]) -> Result<Self> {
        Ok(Self {
            selected: selected.to_vec(),
            f_inv: instance.direct_posterior(selected)?,
            sigma: instance.sigma,
            prior_trace: instance.prior_trace(),
            gain_evals: 0,
        })
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn f_inv(&self) -> &DMatrix<f64> {
        &self.f_inv
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn gain_evals(&self) -> u64 {
        self.gain_evals
    }

    pub fn contains(&self, j: usize) -> bool {
        self.selected.contains(&j)
    }

    /// `f(S) = Tr(P_{t|t-1}) − Tr(F_S⁻¹)`.
    pub fn objective(&self) -> f64 {
        self.prior_trace - trace(&self.f_inv)
    }

    /// `Tr(F_S⁻¹)`, the filtered MSE.
    pub fn mse(&self) -> f64 {
        trace(&self.f_inv)
    }

    /// Closed-form marginal gain of a sensor with row `a_j`; counted in `gain_evals`.
    pub fn marginal_gain(&mut self, a_j: &DVector<f64>) -> f64 {
        self.gain_evals += 1;
        closed_form_gain(&self.f_inv, a_j, self.sigma)
    }

    /// Returns the state for `S ∪ {j}`.
    pub fn rank_one_update(&self, j: usize, a_j: &DVector<f64>) -> Result<Self> {
        let mut next = self.clone();
        next.apply_rank_one(j, a_j)?;
        Ok(next)
    }

    /// In-place form of [`Self::rank_one_update`], `O(m²)`.
    pub fn apply_rank_one(&mut self, j: usize, a_j: &DVector<f64>) -> Result<()> {
        if self.contains(j) {
            return Err(Error::DuplicateSelection(j));
        }
        if a_j.len() != self.f_inv.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "row has length {}, state dimension is {}",
                a_j.len(),
                self.f_inv.nrows()
            )));
        }
        let v = &self.f_inv * a_j;
        let denom = self.sigma * self.sigma + a_j.dot(&v);
        self.f_inv.ger(-1.0 / denom, &v, &v, 1.0);
        self.f_inv = symmetrize(&self.f_inv);
        self.selected.push(j);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{relative_diff, relative_err};
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn empty_objective_is_zero() {
        let inst = SensorInstance::new(DMatrix::identity(3, 3) * 2.0, DMatrix::zeros(4, 3), 1.0).unwrap();
        assert_eq!(inst.empty_state().objective(), 0.0);
        assert_eq!(inst.direct_objective(&[]).unwrap(), 0.0);
    }

    #[test]
    fn scalar_objective_and_gain() {
        let inst = SensorInstance::new(scalar(2.0), scalar(1.0), 1.0).unwrap();
        // f({1}) = 2 − (1/2 + 1)⁻¹ = 4/3
        assert!((inst.direct_objective(&[0]).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        let mut st = inst.empty_state();
        let g = st.marginal_gain(&DVector::from_element(1, 1.0));
        assert!((g - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(st.gain_evals(), 1);
        let next = st.rank_one_update(0, &DVector::from_element(1, 1.0)).unwrap();
        assert!((next.f_inv()[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        assert!((next.objective() - g).abs() < 1e-15);
    }

    #[test]
    fn zero_row_is_inert() {
        let inst = SensorInstance::new(DMatrix::identity(2, 2), DMatrix::zeros(2, 2), 0.5).unwrap();
        let mut st = inst.empty_state();
        let zero = DVector::zeros(2);
        assert_eq!(st.marginal_gain(&zero), 0.0);
        let next = st.rank_one_update(1, &zero).unwrap();
        assert_eq!(next.f_inv(), st.f_inv());
        assert_eq!(next.selected(), &[1]);
    }

    #[test]
    fn duplicate_update_rejected() {
        let inst = SensorInstance::new(DMatrix::identity(2, 2), DMatrix::identity(2, 2), 1.0).unwrap();
        let st = inst.empty_state().rank_one_update(0, &inst.row(0)).unwrap();
        assert_eq!(st.rank_one_update(0, &inst.row(0)), Err(Error::DuplicateSelection(0)));
        assert_eq!(inst.direct_posterior(&[1, 1]), Err(Error::DuplicateSelection(1)));
    }

    #[test]
    fn chained_updates_match_direct_inverse() {
        let mut r = rng::seeded(9);
        for _ in 0..50 {
            let m = r.random_range(1..=10);
            let n = r.random_range(1..=12);
            let b = DMatrix::<f64>::from_fn(m, m, |_, _| r.sample(StandardNormal));
            let prior = &b * b.transpose() + DMatrix::identity(m, m);
            let rows = DMatrix::<f64>::from_fn(n, m, |_, _| r.sample(StandardNormal));
            let inst = SensorInstance::new(prior, rows, 0.8).unwrap();
            let order: Vec<usize> = (0..n.min(8)).rev().collect();
            let mut st = inst.empty_state();
            for &j in &order {
                st.apply_rank_one(j, &inst.row(j)).unwrap();
            }
            let mut sorted = order.clone();
            sorted.sort_unstable();
            let direct = inst.direct_posterior(&sorted).unwrap();
            assert!(relative_diff(st.f_inv(), &direct) < 1e-8);
            assert!(relative_err(st.objective(), inst.direct_objective(&sorted).unwrap()) < 1e-8);
        }
    }
}
