//! Element-wise curvature of the scheduling objective.
//!
//! For distance `l`, `C_l = max f_i(T) / f_i(S)` over triples `S ⊂ T ⊂ [n]`,
//! `i ∉ T`, `|T ∖ S| = l`; `C_max = max_l C_l`. A set function is submodular iff
//! `C_max ≤ 1`. The trace objective is not, so `C_max > 1` is expected and never
//! clamped. The second half of the module evaluates the high-probability curvature
//! bound for i.i.d. random measurement rows and checks it by simulation.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{eigen_extremes, validate_spd, SPD_TOLERANCE};
use crate::rng;
use crate::scheduler::{closed_form_gain, SensorInstance};
use crate::state_space::RowDistribution;

/// Largest ground set the exact enumeration accepts by default.
pub const DEFAULT_EXACT_CAP: usize = 10;
/// Hard limit for the bitmask enumeration.
const MAX_ENUMERABLE: usize = 20;
/// Triples whose denominator gain is at or below this are skipped.
pub const GAIN_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureMode {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    /// `C_l` for `l = 1..n-1` (index 0 holds `l = 1`). Zero when no triple at that distance was usable.
    pub per_distance: Vec<f64>,
    pub c_max: f64,
    pub mode: CurvatureMode,
    /// Number of sampled triples (sampled mode) or enumerated triples (exact mode).
    pub samples: u64,
    pub skipped: u64,
    /// `max(1, C_max)`, the constant entering the greedy guarantee.
    pub c_effective: f64,
}

impl CurvatureReport {
    fn from_parts(per_distance: Vec<f64>, mode: CurvatureMode, samples: u64, skipped: u64) -> Self {
        let c_max = per_distance.iter().copied().fold(0.0, f64::max);
        Self {
            per_distance,
            c_max,
            mode,
            samples,
            skipped,
            c_effective: c_max.max(1.0),
        }
    }
}

fn check_cap(n: usize, cap: Option<usize>) -> Result<()> {
    let cap = cap.unwrap_or(DEFAULT_EXACT_CAP).min(MAX_ENUMERABLE);
    if n > cap {
        return Err(Error::InstanceTooLarge {
            what: "curvature enumeration (ground set size)",
            required: n as u128,
            cap: cap as u128,
        });
    }
    Ok(())
}

fn mask_indices(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|&i| mask & (1 << i) != 0).collect()
}

/// Exact curvature of an arbitrary set function over a ground set of `n`
/// elements, given its marginal gain `gain(mask, i)` for `i ∉ mask`.
pub fn exact_set_curvature<G>(n: usize, cap: Option<usize>, gain: G) -> Result<CurvatureReport>
where
    G: Fn(usize, usize) -> Result<f64> + Sync,
{
    check_cap(n, cap)?;
    if n < 2 {
        return Ok(CurvatureReport::from_parts(Vec::new(), CurvatureMode::Exact, 0, 0));
    }
    let full = 1usize << n;
    let table: Vec<Vec<f64>> = (0..full)
        .into_par_iter()
        .map(|mask| {
            (0..n)
                .map(|i| if mask & (1 << i) != 0 { Ok(f64::NAN) } else { gain(mask, i) })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let (per_distance, triples, skipped) = (0..full)
        .into_par_iter()
        .map(|t| {
            let mut best = vec![0.0f64; n - 1];
            let (mut triples, mut skipped) = (0u64, 0u64);
            let t_size = t.count_ones();
            let outside: Vec<usize> = (0..n).filter(|&i| t & (1 << i) == 0).collect();
            if outside.is_empty() || t == 0 {
                return (best, 0, 0);
            }
            // proper submasks of t, including the empty set
            let mut s = (t - 1) & t;
            loop {
                let l = (t_size - s.count_ones()) as usize;
                for &i in &outside {
                    triples += 1;
                    let denom = table[s][i];
                    if denom <= GAIN_FLOOR {
                        skipped += 1;
                        continue;
                    }
                    let ratio = table[t][i] / denom;
                    if ratio > best[l - 1] {
                        best[l - 1] = ratio;
                    }
                }
                if s == 0 {
                    break;
                }
                s = (s - 1) & t;
            }
            (best, triples, skipped)
        })
        .reduce(
            || (vec![0.0f64; n - 1], 0, 0),
            |mut a, b| {
                for (x, y) in a.0.iter_mut().zip(&b.0) {
                    *x = x.max(*y);
                }
                (a.0, a.1 + b.1, a.2 + b.2)
            },
        );
    Ok(CurvatureReport::from_parts(per_distance, CurvatureMode::Exact, triples, skipped))
}

fn objective_gain(instance: &SensorInstance, selected: &[usize], i: usize) -> Result<f64> {
    let post = instance.direct_posterior(selected)?;
    Ok(closed_form_gain(&post, &instance.row(i), instance.sigma()))
}

/// Exact curvature of `f(S) = Tr(P) − Tr(F_S⁻¹)` by full enumeration; gains are the
/// closed form evaluated on directly inverted Fisher matrices. `cap` defaults to
/// [`DEFAULT_EXACT_CAP`].
pub fn exact_curvature(instance: &SensorInstance, cap: Option<usize>) -> Result<CurvatureReport> {
    let n = instance.num_sensors();
    check_cap(n, cap)?;
    // one inversion per subset, shared by every i
    let posts: Vec<DMatrix<f64>> = (0..1usize << n)
        .into_par_iter()
        .map(|mask| instance.direct_posterior(&mask_indices(mask, n)))
        .collect::<Result<_>>()?;
    let rows: Vec<_> = (0..n).map(|i| instance.row(i)).collect();
    exact_set_curvature(n, cap, |mask, i| {
        Ok(closed_form_gain(&posts[mask], &rows[i], instance.sigma()))
    })
}

/// Lower estimate of the curvature from `samples` random triples.
///
/// Each draw picks sizes `|S| < |T| ≤ n−1` uniformly among valid pairs, then `T`
/// uniformly, `S ⊂ T` uniformly, and `i ∉ T` uniformly. The first `s` draws for a
/// seed are the same for any larger sample count.
pub fn sampled_curvature(
    instance: &SensorInstance,
    samples: u64,
    seed: u64,
) -> Result<CurvatureReport> {
    if samples == 0 {
        return Err(Error::InvalidParams("samples must be at least 1".into()));
    }
    let n = instance.num_sensors();
    if n < 2 {
        return Ok(CurvatureReport::from_parts(Vec::new(), CurvatureMode::Sampled, samples, 0));
    }
    let pairs: Vec<(usize, usize)> = (1..n).flat_map(|t| (0..t).map(move |s| (s, t))).collect();
    let mut r = rng::seeded(seed);
    let mut best = vec![0.0f64; n - 1];
    let mut skipped = 0;
    for _ in 0..samples {
        let (s_size, t_size) = pairs[r.random_range(0..pairs.len())];
        let t_members = index::sample(&mut r, n, t_size).into_vec();
        let s_pos = index::sample(&mut r, t_size, s_size).into_vec();
        let mut s_set: Vec<usize> = s_pos.iter().map(|&p| t_members[p]).collect();
        let mut t_set = t_members;
        s_set.sort_unstable();
        t_set.sort_unstable();
        let outside: Vec<usize> = (0..n).filter(|i| !t_set.contains(i)).collect();
        let i = outside[r.random_range(0..outside.len())];
        let denom = objective_gain(instance, &s_set, i)?;
        if denom <= GAIN_FLOOR {
            skipped += 1;
            continue;
        }
        let ratio = objective_gain(instance, &t_set, i)? / denom;
        let l = t_size - s_size;
        best[l - 1] = best[l - 1].max(ratio);
    }
    Ok(CurvatureReport::from_parts(best, CurvatureMode::Sampled, samples, skipped))
}

/// Inputs of the probabilistic curvature bound for i.i.d. zero-mean rows with
/// covariance `σ_h² I_m` and `‖a_j‖² ≤ C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem2Params {
    pub sigma_h: f64,
    /// Almost-sure bound `C` on `‖a_j‖²`.
    pub norm_bound: f64,
    pub q: f64,
    pub n: usize,
    pub m: usize,
    pub lambda_max_p: f64,
    pub lambda_min_p: f64,
    pub sigma: f64,
}

impl Theorem2Params {
    pub fn validate(&self) -> Result<()> {
        let var = self.sigma_h * self.sigma_h;
        if !(self.q > 0.0) {
            return Err(Error::InvalidParams(format!("q must be positive, got {}", self.q)));
        }
        if !(self.lambda_min_p > 0.0) || self.lambda_max_p < self.lambda_min_p {
            return Err(Error::InvalidParams("prior eigenvalues must satisfy 0 < λ_min ≤ λ_max".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::InvalidParams("sigma must be positive".into()));
        }
        if self.norm_bound < self.m as f64 * var * (1.0 - 1e-12) {
            return Err(Error::InvalidParams(format!(
                "norm bound C = {} is below m·σ_h² = {}",
                self.norm_bound,
                self.m as f64 * var
            )));
        }
        Ok(())
    }

    pub fn phi(&self) -> f64 {
        theorem2_phi(self.lambda_min_p, self.sigma, self.sigma_h, self.n, self.q)
    }

    /// Threshold of the spectral event `λ_max(Σ_j a_j a_jᵀ) ≤ nσ_h² + q`.
    pub fn event_threshold(&self) -> f64 {
        self.n as f64 * self.sigma_h * self.sigma_h + self.q
    }
}

/// `φ = (1/λ_min(P) + (nσ_h² + q)/σ²)⁻¹`.
pub fn theorem2_phi(lambda_min_p: f64, sigma: f64, sigma_h: f64, n: usize, q: f64) -> f64 {
    1.0 / (1.0 / lambda_min_p + (n as f64 * sigma_h * sigma_h + q) / (sigma * sigma))
}

/// `λ_max(P)²(σ² + λ_max(P)·C) / (φ²(σ² + φ·C))`.
pub fn theorem2_curvature_bound(params: &Theorem2Params) -> f64 {
    curvature_bound_with_phi(params, params.phi())
}

fn curvature_bound_with_phi(params: &Theorem2Params, phi: f64) -> f64 {
    let s2 = params.sigma * params.sigma;
    let lm = params.lambda_max_p;
    let c = params.norm_bound;
    lm * lm * (s2 + lm * c) / (phi * phi * (s2 + phi * c))
}

/// `1 − m·exp(−(q²/2) / ((C − σ_h²)(nσ_h² + q/3)))`, clamped to `[0, 1]`.
pub fn theorem2_success_probability(params: &Theorem2Params) -> Result<f64> {
    let var = params.sigma_h * params.sigma_h;
    let spread = params.norm_bound - var;
    if spread <= 0.0 {
        return Err(Error::InvalidParams(format!(
            "C = {} must exceed σ_h² = {var}",
            params.norm_bound
        )));
    }
    let exponent = -(params.q * params.q / 2.0) / (spread * (params.n as f64 * var + params.q / 3.0));
    Ok((1.0 - params.m as f64 * exponent.exp()).clamp(0.0, 1.0))
}

/// Outcome of a Monte-Carlo check of the probabilistic curvature bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theorem2Check {
    pub params: Theorem2Params,
    pub trials: usize,
    pub event_count: usize,
    pub event_frequency: f64,
    pub probability_bound: f64,
    pub curvature_bound: f64,
    /// Trials where the event held but `C_max` exceeded the bound.
    pub conditional_violations: usize,
    /// Largest `C_max / bound` among trials where the event held.
    pub max_bound_ratio: f64,
    pub per_trial: Vec<Theorem2Trial>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem2Trial {
    pub spectral_max: f64,
    pub event_holds: bool,
    /// Exact `C_max`; only computed when the event holds.
    pub c_max: Option<f64>,
}

/// Relative slack allowed when comparing an enumerated `C_max` with the analytic bound.
pub const BOUND_SLACK: f64 = 1e-9;

/// Draws `trials` sphere-distributed measurement matrices (`n` rows, radius
/// `√(mσ_h²)`), records how often the spectral event holds and checks the curvature
/// bound on every trial where it does.
#[allow(clippy::too_many_arguments)]
pub fn theorem2_empirical_check(
    prior: &DMatrix<f64>,
    sigma: f64,
    sigma_h: f64,
    norm_bound: f64,
    q: f64,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<Theorem2Check> {
    let prior = validate_spd(prior, SPD_TOLERANCE)?;
    let m = prior.nrows();
    let (lambda_min_p, lambda_max_p) = eigen_extremes(&prior);
    let params = Theorem2Params { sigma_h, norm_bound, q, n, m, lambda_max_p, lambda_min_p, sigma };
    params.validate()?;
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be at least 1".into()));
    }
    let probability_bound = theorem2_success_probability(&params)?;
    let curvature_bound = theorem2_curvature_bound(&params);
    let threshold = params.event_threshold();
    let dist = RowDistribution::Sphere { sigma_h };

    let per_trial: Vec<Theorem2Trial> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut r = rng::substream(seed, &[trial as u64]);
            let rows = dist.sample(n, m, &mut r);
            let (_, spectral_max) = eigen_extremes(&(rows.transpose() * &rows));
            let event_holds = spectral_max <= threshold;
            let c_max = if event_holds {
                let inst = SensorInstance::new(prior.clone(), rows, sigma)?;
                Some(exact_curvature(&inst, Some(n))?.c_max)
            } else {
                None
            };
            Ok(Theorem2Trial { spectral_max, event_holds, c_max })
        })
        .collect::<Result<_>>()?;

    let event_count = per_trial.iter().filter(|t| t.event_holds).count();
    let ratios = per_trial.iter().filter_map(|t| t.c_max).map(|c| c / curvature_bound);
    let max_bound_ratio = ratios.clone().fold(0.0, f64::max);
    let conditional_violations = ratios.filter(|&r| r > 1.0 + BOUND_SLACK).count();
    Ok(Theorem2Check {
        params,
        trials,
        event_count,
        event_frequency: event_count as f64 / trials as f64,
        probability_bound,
        curvature_bound,
        conditional_violations,
        max_bound_ratio,
        per_trial,
    })
}
