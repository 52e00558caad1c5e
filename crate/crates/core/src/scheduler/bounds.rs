//! Sampling rule and approximation-guarantee arithmetic for the randomized greedy.

use log::warn;

use crate::error::{Error, Result};

/// Accepts `ε ∈ [e^{-k}, 1)`.
pub fn validate_epsilon(epsilon: f64, k: usize) -> Result<()> {
    let floor = (-(k as f64)).exp();
    // small relative slack so that a caller passing exp(-k) is never rejected
    if !epsilon.is_finite() || epsilon >= 1.0 || epsilon < floor * (1.0 - 1e-12) {
        return Err(Error::InvalidEpsilon { epsilon, k });
    }
    Ok(())
}

/// Candidate-pool size `s = ⌈(n/k)·ln(1/ε)⌉`, clamped to `[1, n]`.
pub fn sample_size(n: usize, k: usize, epsilon: f64) -> Result<usize> {
    if k == 0 || k > n {
        return Err(Error::InfeasibleBudget { k, n });
    }
    validate_epsilon(epsilon, k)?;
    let raw = (n as f64 / k as f64) * -epsilon.ln();
    // absorb round-off in ln so that exact integers are not pushed up by one
    let s = (raw - 1e-9 * raw.max(1.0)).ceil();
    Ok((s.max(1.0) as usize).min(n))
}

/// `β = 1 + max{0, s/(2n) − 1/(2(n−s))}`, and `β = 1` when `s = n`.
pub fn beta(s: usize, n: usize) -> f64 {
    if s >= n {
        return 1.0;
    }
    let (s, n) = (s as f64, n as f64);
    1.0 + (s / (2.0 * n) - 1.0 / (2.0 * (n - s))).max(0.0)
}

/// A guarantee factor, clamped at zero when the raw value is negative.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Guarantee {
    pub value: f64,
    pub raw: f64,
    pub vacuous: bool,
}

/// `α = 1 − e^{−1/c} − ε^β / c`.
///
/// With `beta = 1` this is the conservative factor used in the MSE bound.
pub fn guarantee_alpha(c: f64, epsilon: f64, beta: f64) -> Guarantee {
    let c = c.max(1.0);
    let raw = 1.0 - (-1.0 / c).exp() - epsilon.powf(beta) / c;
    let vacuous = raw <= 0.0;
    if vacuous {
        warn!("guarantee is vacuous (c = {c}, ε = {epsilon}, β = {beta})");
    }
    Guarantee { value: raw.max(0.0), raw, vacuous }
}

/// Upper bound on the expected filtered MSE: `α·MSE_opt + (1 − α)·Tr(P_{t|t-1})`.
pub fn mse_bound(alpha: f64, mse_opt: f64, prior_trace: f64) -> f64 {
    alpha * mse_opt + (1.0 - alpha) * prior_trace
}
