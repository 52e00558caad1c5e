//! Linear time-varying state-space model and the Kalman covariance recursions.
//!
//! The model is
//!
//! ```text
//! x(t+1) = H(t) x(t) + w(t),   w(t) ~ N(0, σ² I_m)
//! y(t)   = A(t) x(t) + v(t),   v(t) ~ N(0, σ² I_n)
//! ```
//!
//! with `x(0) ~ N(0, Σ_x)`. Row `j` of `A(t)` is the measurement vector of sensor `j`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{spd_inverse, symmetrize, validate_spd, SPD_TOLERANCE};
use crate::rng;

/// Distribution of randomly generated measurement rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowDistribution {
    /// Entries i.i.d. `N(0, σ_h²)`.
    Gaussian { sigma_h: f64 },
    /// Uniform on the sphere of radius `√(m σ_h²)`: covariance `σ_h² I` and `‖a‖² = m σ_h²`.
    Sphere { sigma_h: f64 },
}

impl RowDistribution {
    pub fn sigma_h(&self) -> f64 {
        match *self {
            RowDistribution::Gaussian { sigma_h } | RowDistribution::Sphere { sigma_h } => sigma_h,
        }
    }

    /// Draws a `rows × cols` matrix whose rows follow this distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
        match *self {
            RowDistribution::Gaussian { sigma_h } => {
                DMatrix::from_fn(rows, cols, |_, _| sigma_h * rng.sample::<f64, _>(StandardNormal))
            }
            RowDistribution::Sphere { sigma_h } => {
                let radius = (cols as f64 * sigma_h * sigma_h).sqrt();
                let mut out = DMatrix::zeros(rows, cols);
                for r in 0..rows {
                    let v = loop {
                        let v = DVector::<f64>::from_fn(cols, |_, _| rng.sample(StandardNormal));
                        let norm = v.norm();
                        if norm > 1e-12 {
                            break v / norm;
                        }
                    };
                    out.set_row(r, &(v * radius).transpose());
                }
                out
            }
        }
    }
}

/// A possibly time-varying matrix-valued sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixSequence {
    /// Same matrix at every step.
    Fixed(DMatrix<f64>),
    /// One matrix per step; asking past the end is an error.
    PerStep(Vec<DMatrix<f64>>),
    /// Fresh random matrix per step, deterministic in `(seed, t)`.
    Random {
        rows: usize,
        cols: usize,
        dist: RowDistribution,
        seed: u64,
    },
}

impl MatrixSequence {
    pub fn at(&self, t: usize) -> Result<DMatrix<f64>> {
        match self {
            MatrixSequence::Fixed(m) => Ok(m.clone()),
            MatrixSequence::PerStep(ms) => ms.get(t).cloned().ok_or_else(|| {
                Error::InvalidModel(format!("no matrix supplied for step {t} (have {})", ms.len()))
            }),
            MatrixSequence::Random { rows, cols, dist, seed } => {
                let mut r = rng::substream(*seed, &[t as u64]);
                Ok(dist.sample(*rows, *cols, &mut r))
            }
        }
    }

    fn shape(&self) -> Option<(usize, usize)> {
        match self {
            MatrixSequence::Fixed(m) => Some(m.shape()),
            MatrixSequence::PerStep(ms) => ms.first().map(|m| m.shape()),
            MatrixSequence::Random { rows, cols, .. } => Some((*rows, *cols)),
        }
    }

    fn check_shape(&self, rows: usize, cols: usize, what: &str) -> Result<()> {
        let ok = match self {
            MatrixSequence::PerStep(ms) => {
                !ms.is_empty() && ms.iter().all(|m| m.shape() == (rows, cols))
            }
            _ => self.shape() == Some((rows, cols)),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "{what} must be {rows}x{cols} at every step (got {:?})",
                self.shape()
            )))
        }
    }
}

/// The world being estimated: dynamics, sensors and noise level.
#[derive(Debug, Clone)]
pub struct StateSpaceModel {
    state_dim: usize,
    num_sensors: usize,
    sigma: f64,
    initial_cov: DMatrix<f64>,
    transitions: MatrixSequence,
    measurements: MatrixSequence,
}

impl StateSpaceModel {
    pub fn new(
        initial_cov: DMatrix<f64>,
        transitions: MatrixSequence,
        measurements: MatrixSequence,
        sigma: f64,
    ) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidModel(format!("sigma must be positive, got {sigma}")));
        }
        let initial_cov = validate_spd(&initial_cov, SPD_TOLERANCE)?;
        let m = initial_cov.nrows();
        transitions.check_shape(m, m, "state transition")?;
        let n = measurements
            .shape()
            .map(|(r, _)| r)
            .ok_or_else(|| Error::InvalidModel("no measurement matrices".into()))?;
        if n == 0 {
            return Err(Error::InvalidModel("at least one sensor is required".into()));
        }
        measurements.check_shape(n, m, "measurement matrix")?;
        Ok(Self {
            state_dim: m,
            num_sensors: n,
            sigma,
            initial_cov,
            transitions,
            measurements,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn num_sensors(&self) -> usize {
        self.num_sensors
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn initial_cov(&self) -> &DMatrix<f64> {
        &self.initial_cov
    }

    /// State transition `H(t)`.
    pub fn transition(&self, t: usize) -> Result<DMatrix<f64>> {
        self.transitions.at(t)
    }

    /// Measurement matrix `A(t)`.
    pub fn measurement(&self, t: usize) -> Result<DMatrix<f64>> {
        self.measurements.at(t)
    }
}

/// Prediction and filtered error covariances at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    pub t: usize,
    pub predicted: DMatrix<f64>,
    pub filtered: DMatrix<f64>,
}

/// `P_{t|t-1} = H P_{t-1|t-1} Hᵀ + σ² I`.
pub fn predict_covariance(
    filtered: &DMatrix<f64>,
    transition: &DMatrix<f64>,
    sigma: f64,
) -> Result<DMatrix<f64>> {
    let p = validate_spd(filtered, SPD_TOLERANCE)?;
    if transition.shape() != p.shape() {
        return Err(Error::DimensionMismatch(format!(
            "transition is {}x{}, covariance is {}x{}",
            transition.nrows(),
            transition.ncols(),
            p.nrows(),
            p.ncols()
        )));
    }
    let m = p.nrows();
    let out = transition * p * transition.transpose() + DMatrix::identity(m, m) * (sigma * sigma);
    Ok(symmetrize(&out))
}

/// `P_{t|t} = (P_{t|t-1}⁻¹ + σ⁻² A_Sᵀ A_S)⁻¹` by direct factorization.
pub fn filtered_covariance(
    predicted: &DMatrix<f64>,
    selected_rows: &DMatrix<f64>,
    sigma: f64,
) -> Result<DMatrix<f64>> {
    let p = validate_spd(predicted, SPD_TOLERANCE)?;
    if selected_rows.nrows() == 0 {
        return Ok(p);
    }
    if selected_rows.ncols() != p.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "measurement rows have length {}, state dimension is {}",
            selected_rows.ncols(),
            p.nrows()
        )));
    }
    let info = spd_inverse(&p)? + selected_rows.transpose() * selected_rows / (sigma * sigma);
    spd_inverse(&symmetrize(&info))
}

/// One sampled path of the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub measurements: Vec<DVector<f64>>,
}

/// Samples `x_0..x_{T-1}` and `y_0..y_{T-1}`; deterministic in `seed`.
pub fn simulate(model: &StateSpaceModel, horizon: usize, seed: u64) -> Result<Trajectory> {
    if horizon == 0 {
        return Err(Error::InvalidParams("horizon must be at least 1".into()));
    }
    let mut r = rng::seeded(seed);
    let m = model.state_dim;
    let chol = model
        .initial_cov
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidCovariance("initial covariance is not SPD".into()))?;
    let z = DVector::<f64>::from_fn(m, |_, _| r.sample(StandardNormal));
    let mut x = chol.l() * z;
    let mut states = Vec::with_capacity(horizon);
    let mut measurements = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let a = model.measurement(t)?;
        let v = DVector::<f64>::from_fn(a.nrows(), |_, _| model.sigma * r.sample::<f64, _>(StandardNormal));
        measurements.push(&a * &x + v);
        let h = model.transition(t)?;
        let w = DVector::<f64>::from_fn(m, |_, _| model.sigma * r.sample::<f64, _>(StandardNormal));
        let next = &h * &x + w;
        states.push(std::mem::replace(&mut x, next));
    }
    Ok(Trajectory { states, measurements })
}
