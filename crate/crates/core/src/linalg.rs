//! Small dense linear-algebra helpers shared by the estimation modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Default relative tolerance used when validating symmetric positive-definite input.
pub const SPD_TOLERANCE: f64 = 1e-10;

/// Returns `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn trace(m: &DMatrix<f64>) -> f64 {
    m.diagonal().sum()
}

/// Frobenius-norm relative difference `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

/// Scalar analogue of [`relative_diff`].
pub fn relative_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Extreme eigenvalues `(λ_min, λ_max)` of a symmetric matrix.
pub fn eigen_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Checks that `m` is square, symmetric and positive definite up to `tol` (relative),
/// and returns its symmetrized copy.
///
/// Eigenvalues in `(-tol·s, tol·s]` with `s = max(1, λ_max)` are clamped up to `tol·s`;
/// anything more negative is rejected.
pub fn validate_spd(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::InvalidCovariance(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidCovariance("empty matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidCovariance("non-finite entry".into()));
    }
    let asym = (m - m.transpose()).norm();
    if asym > tol * m.norm().max(1.0) {
        return Err(Error::InvalidCovariance(format!(
            "matrix is not symmetric (‖M − Mᵀ‖ = {asym:e})"
        )));
    }
    let sym = symmetrize(m);
    let eig = SymmetricEigen::new(sym.clone());
    let max = eig.eigenvalues.max();
    let scale = max.max(1.0);
    let min = eig.eigenvalues.min();
    if min < -tol * scale {
        return Err(Error::InvalidCovariance(format!(
            "minimum eigenvalue {min:e} is negative"
        )));
    }
    if min > tol * scale {
        return Ok(sym);
    }
    let floor = tol * scale;
    let clamped = eig.eigenvalues.map(|v| v.max(floor));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    Ok(symmetrize(&rebuilt))
}

/// Inverse of a symmetric positive-definite matrix through its Cholesky factor.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidCovariance("Cholesky factorization failed".into()))?;
    Ok(symmetrize(&chol.inverse()))
}

/// `Σ_{i ∈ rows} a_i a_iᵀ` accumulated in the order given.
pub fn gram_of_rows(a: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    let m = a.ncols();
    let mut g = DMatrix::zeros(m, m);
    for &i in rows {
        let r = a.row(i).transpose();
        g.ger(1.0, &r, &r, 1.0);
    }
    g
}

pub fn row_vector(a: &DMatrix<f64>, i: usize) -> DVector<f64> {
    a.row(i).transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_square_and_indefinite() {
        assert!(validate_spd(&DMatrix::zeros(2, 3), SPD_TOLERANCE).is_err());
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            validate_spd(&m, SPD_TOLERANCE),
            Err(Error::InvalidCovariance(_))
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(validate_spd(&asym, SPD_TOLERANCE).is_err());
    }

    #[test]
    fn clamps_round_off_negative_eigenvalue() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-14]);
        let fixed = validate_spd(&m, SPD_TOLERANCE).unwrap();
        let (min, _) = eigen_extremes(&fixed);
        assert!(min > 0.0);
    }

    #[test]
    fn spd_inverse_matches_identity() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let inv = spd_inverse(&m).unwrap();
        assert!(relative_diff(&(&m * &inv), &DMatrix::identity(2, 2)) < 1e-14);
    }
}
