//! Reference computations for the integration tests. Everything here inverts
//! matrices directly with LU and enumerates subsets by bitmask; none of it goes
//! through the library's incremental code paths.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.sample(StandardNormal))
}

/// `B Bᵀ / m + shift·I`, well conditioned.
pub fn random_spd(r: &mut ChaCha8Rng, m: usize, shift: f64) -> DMatrix<f64> {
    let b = gaussian(r, m, m);
    &b * b.transpose() / m as f64 + DMatrix::identity(m, m) * shift
}

pub fn inv(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().try_inverse().expect("invertible")
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn rel_mat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

pub fn mask_members(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask >> i & 1 == 1).collect()
}

/// `(P⁻¹ + σ⁻² Σ_{j∈S} a_j a_jᵀ)⁻¹`.
pub fn posterior(prior: &DMatrix<f64>, rows: &DMatrix<f64>, sigma: f64, subset: &[usize]) -> DMatrix<f64> {
    let mut info = inv(prior);
    for &j in subset {
        let a: DVector<f64> = rows.row(j).transpose();
        info += &a * a.transpose() / (sigma * sigma);
    }
    inv(&info)
}

/// `Tr(P) − Tr(F_S⁻¹)`.
pub fn objective(prior: &DMatrix<f64>, rows: &DMatrix<f64>, sigma: f64, subset: &[usize]) -> f64 {
    prior.trace() - posterior(prior, rows, sigma, subset).trace()
}

/// `f` at every bitmask of the `n` rows.
pub fn objective_table(prior: &DMatrix<f64>, rows: &DMatrix<f64>, sigma: f64) -> Vec<f64> {
    let n = rows.nrows();
    (0..1usize << n).map(|mask| objective(prior, rows, sigma, &mask_members(mask, n))).collect()
}

/// Best value over masks with `k` members (ties irrelevant for the value).
pub fn brute_force(table: &[f64], k: usize) -> (f64, usize) {
    table
        .iter()
        .enumerate()
        .filter(|(mask, _)| mask.count_ones() as usize == k)
        .map(|(mask, &v)| (v, mask))
        .fold((f64::NEG_INFINITY, 0), |best, cur| if cur.0 > best.0 { cur } else { best })
}

/// `max (f(T∪i) − f(T)) / (f(S∪i) − f(S))` over `S ⊊ T`, `i ∉ T`, straight from the
/// definition; triples whose denominator is at most `1e-14` are ignored.
pub fn definition_curvature(table: &[f64], n: usize) -> f64 {
    let full = (1usize << n) - 1;
    let mut best = 0.0f64;
    for t in 1..=full {
        // iterate the proper subsets of t
        let mut s = t;
        loop {
            s = (s.wrapping_sub(1)) & t;
            for i in (0..n).filter(|&i| t >> i & 1 == 0) {
                let denom = table[s | 1 << i] - table[s];
                if denom > 1e-14 {
                    best = best.max((table[t | 1 << i] - table[t]) / denom);
                }
            }
            if s == 0 {
                break;
            }
        }
    }
    best
}

/// `1 − e^{−1/c} − ε^β / c` with `c ← max(1, c)`, unclamped.
pub fn alpha(c: f64, eps: f64, beta: f64) -> f64 {
    let c = c.max(1.0);
    1.0 - (-1.0 / c).exp() - eps.powf(beta) / c
}

/// Pool size as the algorithm states it: `⌈(n/k) ln(1/ε)⌉`, within `[1, n]`.
pub fn pool_size(n: usize, k: usize, eps: f64) -> usize {
    let raw = n as f64 / k as f64 * (1.0 / eps).ln();
    (raw - 1e-9).ceil().clamp(1.0, n as f64) as usize
}

/// `1 + max{0, s/(2n) − 1/(2(n−s))}`, 1 at `s = n`.
pub fn beta(s: usize, n: usize) -> f64 {
    if s == n {
        1.0
    } else {
        1.0 + (s as f64 / (2.0 * n as f64) - 1.0 / (2.0 * (n - s) as f64)).max(0.0)
    }
}

/// A toy exchange network in plain matrices: per-node Fisher `F_i`, rows `H_i`, σ.
pub struct ToyNetwork {
    pub fisher: Vec<DMatrix<f64>>,
    pub obs: Vec<DMatrix<f64>>,
    pub sigma: f64,
}

impl ToyNetwork {
    /// All `(dst, src, meas)` with `dst ≠ src`.
    pub fn triplets(&self) -> Vec<(usize, usize, usize)> {
        let n = self.obs.len();
        let mut out = Vec::new();
        for dst in 0..n {
            for src in (0..n).filter(|&s| s != dst) {
                for k in 0..self.obs[src].nrows() {
                    out.push((dst, src, k));
                }
            }
        }
        out
    }

    /// `u(S)` from scratch.
    pub fn utility(&self, sel: &[(usize, usize, usize)], gamma: f64) -> f64 {
        let mut total = 0.0;
        for (i, f) in self.fisher.iter().enumerate() {
            let mut info = f.clone();
            let mut received = 0usize;
            for &(dst, src, k) in sel.iter().filter(|t| t.0 == i) {
                let _ = dst;
                let h: DVector<f64> = self.obs[src].row(k).transpose();
                info += &h * h.transpose() / (self.sigma * self.sigma);
                received += 1;
            }
            total += inv(f).trace() - inv(&info).trace();
            total += gamma * (1.0 + received as f64 / self.obs[i].nrows() as f64).ln();
        }
        total
    }
}
