//! Mutual coherence and restricted eigenvalues of a design.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

pub const DEFAULT_EXHAUSTIVE_LIMIT: u64 = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub s: usize,
    pub theta: f64,
    pub x_max_sq: f64,
    pub rho_min_t: f64,
    /// False when `rho_min_t` is a sampled upper estimate.
    pub rho_min_exact: bool,
    pub rho_max_gram: f64,
    /// `θ < ρ_min(s)² / (4 ρ_max(XᵀX) s)`.
    pub condition_ok: bool,
}

/// Largest off-diagonal entry of `|XᵀX|`.
pub fn mutual_coherence(design: &DMatrix<f64>) -> f64 {
    let g = linalg::gram(design);
    let d = g.nrows();
    let mut theta = 0.0_f64;
    for i in 0..d {
        for j in 0..i {
            theta = theta.max(g[(i, j)].abs());
        }
    }
    theta
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    c as u64
}

fn subset_min_eig(gram: &DMatrix<f64>, idx: &[usize]) -> f64 {
    linalg::sym_eigen(&linalg::select(gram, idx, idx)).eigenvalues.min()
}

/// `min_{|J| = t} ρ_min(X_Jᵀ X_J)` by enumeration. Subsets smaller than `t`
/// cannot do better by eigenvalue interlacing.
pub fn rho_min_exact(design: &DMatrix<f64>, t: usize) -> f64 {
    let gram = linalg::gram(design);
    let d = gram.nrows();
    let mut idx: Vec<usize> = (0..t).collect();
    let mut best = f64::INFINITY;
    loop {
        best = best.min(subset_min_eig(&gram, &idx));
        // next combination in lexicographic order
        let mut i = t;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < d - t + i {
                break;
            }
        }
        idx[i] += 1;
        for k in i + 1..t {
            idx[k] = idx[k - 1] + 1;
        }
    }
}

/// Minimum over `samples` random subsets of size `t`: an upper estimate of
/// `ρ_min(t)`.
pub fn rho_min_sampled(design: &DMatrix<f64>, t: usize, samples: u64, seed: u64) -> f64 {
    let gram = linalg::gram(design);
    let d = gram.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..samples {
        let mut idx = sample(&mut rng, d, t).into_vec();
        idx.sort_unstable();
        best = best.min(subset_min_eig(&gram, &idx));
    }
    best
}

/// `ρ_min(t)` and whether it was computed exactly.
pub fn rho_min(design: &DMatrix<f64>, t: usize, exhaustive_limit: u64, seed: u64) -> (f64, bool) {
    if binomial(design.ncols(), t) <= exhaustive_limit {
        (rho_min_exact(design, t), true)
    } else {
        (rho_min_sampled(design, t, exhaustive_limit.max(1), seed), false)
    }
}

pub fn coherence_report(design: &DMatrix<f64>, s: usize, exhaustive_limit: u64) -> Result<CoherenceReport> {
    coherence_report_seeded(design, s, exhaustive_limit, 0)
}

/// As [`coherence_report`] with an explicit seed for the sampled path.
pub fn coherence_report_seeded(
    design: &DMatrix<f64>,
    s: usize,
    exhaustive_limit: u64,
    seed: u64,
) -> Result<CoherenceReport> {
    let d = design.ncols();
    if s < 1 || s > d {
        return Err(Error::InvalidConfig(format!("s must lie in 1..={d}, got {s}")));
    }
    let theta = mutual_coherence(design);
    let x_max_sq = design.column_iter().map(|c| c.norm_squared()).fold(0.0, f64::max);
    let (rho_min_t, rho_min_exact) = rho_min(design, s, exhaustive_limit, seed);
    let rho_max_gram = linalg::sym_eigen(&linalg::gram(design)).eigenvalues.max();
    let condition_ok = rho_max_gram > 0.0 && theta < rho_min_t * rho_min_t / (4.0 * rho_max_gram * s as f64);
    Ok(CoherenceReport { s, theta, x_max_sq, rho_min_t, rho_min_exact, rho_max_gram, condition_ok })
}
