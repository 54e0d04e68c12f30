//! Consistency trend of the leave-one-task-out covariance estimate under a
//! shared design.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::fit_scc_trace;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{DiagonalCovariance, MultiTaskDataset, SolverConfig, TaskData};

/// Multipliers of the noise variance tried as the penalty for every `m`.
pub const LAMBDA_MULTIPLIERS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub m: usize,
    pub median_discrepancy: f64,
    /// Best discrepancy over the penalty grid, one per seed.
    pub per_seed: Vec<f64>,
    /// Penalty achieving each per-seed value.
    pub best_lambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyTable {
    pub noise_variance: f64,
    pub lambdas: Vec<f64>,
    pub rows: Vec<ConsistencyRow>,
}

/// Unit-norm Gaussian columns and `Ω̄` equal to one on the first `s` features.
pub fn thm42_default_instance(d: usize, n: usize, s: usize, seed: u64) -> Result<(DiagonalCovariance, DMatrix<f64>)> {
    if s > d || n == 0 {
        return Err(Error::InvalidConfig(format!("need s <= d and n >= 1, got s = {s}, d = {d}, n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    for mut col in x.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let omega = DVector::from_fn(d, |j, _| if j < s { 1.0 } else { 0.0 });
    Ok((DiagonalCovariance::new(omega)?, x))
}

/// `‖X(Ω̂ − Ω̄)Xᵀ‖_F²` for diagonal covariances.
pub fn shared_design_discrepancy(design: &DMatrix<f64>, omega_hat: &DVector<f64>, omega_bar: &DVector<f64>) -> f64 {
    let diff = DMatrix::from_diagonal(&(omega_hat - omega_bar));
    linalg::frobenius_sq(&(design * diff * design.transpose()))
}

/// Draws `m` tasks `y = Xβ + ε` with `β ~ N(0, diag(ω̄))` and `ε ~ N(0, σ²I)`.
pub fn sample_random_effects(
    omega_bar: &DiagonalCovariance,
    design: &DMatrix<f64>,
    m: usize,
    noise_variance: f64,
    rng: &mut ChaCha8Rng,
) -> MultiTaskDataset {
    let d = design.ncols();
    let scale = omega_bar.omega().map(f64::sqrt);
    let sd = noise_variance.sqrt();
    let tasks = (0..m)
        .map(|_| {
            let beta = DVector::from_fn(d, |j, _| scale[j] * rng.sample::<f64, _>(StandardNormal));
            let noise = DVector::from_fn(design.nrows(), |_, _| sd * rng.sample::<f64, _>(StandardNormal));
            TaskData::new(design.clone(), design * beta + noise)
        })
        .collect();
    MultiTaskDataset::new_unchecked(tasks, d)
}

/// For each `m`, fits the trace-penalized diagonal estimator with task 0 left
/// out, over the penalties `σ² · LAMBDA_MULTIPLIERS`, and reports the median
/// over seeds of the best discrepancy. The noise variance `σ²` is
/// `config.lambda`. Datasets for different `m` under one seed are nested.
pub fn thm42_consistency_sweep(
    omega_bar: &DiagonalCovariance,
    design: &DMatrix<f64>,
    m_grid: &[usize],
    seeds: &[u64],
    config: &SolverConfig,
) -> Result<ConsistencyTable> {
    config.validate()?;
    if design.ncols() != omega_bar.dim() {
        return Err(Error::DimensionMismatch(format!(
            "design has {} columns, omega_bar has d = {}",
            design.ncols(),
            omega_bar.dim()
        )));
    }
    if m_grid.is_empty() || m_grid[0] < 2 || m_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("m_grid must be strictly increasing with every m >= 2".into()));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    let noise_variance = config.lambda;
    let lambdas: Vec<f64> = LAMBDA_MULTIPLIERS.iter().map(|k| k * noise_variance).collect();
    let m_max = *m_grid.last().unwrap();

    // per_seed[s][i] = (best discrepancy, best λ) at m_grid[i]
    let per_seed: Vec<Vec<(f64, f64)>> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let full = sample_random_effects(omega_bar, design, m_max, noise_variance, &mut rng);
            m_grid
                .iter()
                .map(|&m| {
                    let ds = MultiTaskDataset::new_unchecked(full.tasks()[1..m].to_vec(), design.ncols());
                    let mut best = (f64::INFINITY, f64::NAN);
                    for &lam in &lambdas {
                        let (est, _) = fit_scc_trace(&ds, &config.clone().with_lambda(lam))?;
                        let disc = shared_design_discrepancy(design, est.omega(), omega_bar.omega());
                        if disc < best.0 {
                            best = (disc, lam);
                        }
                    }
                    Ok(best)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let rows = m_grid
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let vals: Vec<f64> = per_seed.iter().map(|s| s[i].0).collect();
            ConsistencyRow {
                m,
                median_discrepancy: median(&vals),
                per_seed: vals,
                best_lambda: per_seed.iter().map(|s| s[i].1).collect(),
            }
        })
        .collect();
    Ok(ConsistencyTable { noise_variance, lambdas, rows })
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
