//! Diagonal plus low-rank covariance:
//! `½ Σ ‖y yᵀ − X (Ω_S + Ω_L) Xᵀ‖²_F + λ₁ Σ ω_j + λ₂ tr(Ω_L)` over nonnegative
//! diagonal `Ω_S = diag(ω)` and PSD `Ω_L` (where the trace norm is the trace).
//!
//! Block-alternating: an exact coordinate-descent solve for `ω` with `Ω_L`
//! held fixed, then one backtracked proximal-gradient step on `Ω_L`
//! (eigenvalue soft-threshold plus clipping).

use nalgebra::{DMatrix, DVector};

use super::moments::Moments;
use super::scc::{build_scc_quadratic, nonneg_cd, SccQuadratic};
use super::SolveTrace;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{DiagPlusLowRank, DiagonalCovariance, FullCovariance, MultiTaskDataset, SolverConfig};

pub fn fit_diag_lowrank(
    dataset: &MultiTaskDataset,
    config: &SolverConfig,
) -> Result<(DiagPlusLowRank, SolveTrace)> {
    config.validate()?;
    let quad = build_scc_quadratic(dataset)?;
    let moments = Moments::new(dataset);
    solve_diag_lowrank(&quad, &moments, config.lambda1, config.lambda2, None, config)
}

/// Low-rank iterate kept alongside its factor `R` with `Ω_L = R Rᵀ`.
#[derive(Clone)]
struct LowRank {
    matrix: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl LowRank {
    fn zeros(d: usize) -> Self {
        Self { matrix: DMatrix::zeros(d, d), factor: DMatrix::zeros(d, 0) }
    }

    fn from_psd(m: &DMatrix<f64>) -> Self {
        let factor = linalg::psd_range_factor(m);
        let matrix = &factor * factor.transpose();
        Self { matrix, factor }
    }

    fn trace(&self) -> f64 {
        self.matrix.trace()
    }
}

/// Prox of `t λ₂ tr(·)` plus the PSD indicator: shift eigenvalues down and clip.
fn eigen_shrink(v: &DMatrix<f64>, shift: f64) -> LowRank {
    let d = v.nrows();
    let eig = linalg::sym_eigen(v);
    let keep: Vec<usize> = (0..d).filter(|&k| eig.eigenvalues[k] - shift > 0.0).collect();
    let mut factor = DMatrix::zeros(d, keep.len());
    for (c, &k) in keep.iter().enumerate() {
        let s = (eig.eigenvalues[k] - shift).sqrt();
        factor.set_column(c, &(eig.eigenvectors.column(k) * s));
    }
    let matrix = linalg::symmetrize(&(&factor * factor.transpose()));
    LowRank { matrix, factor }
}

/// Objective pieces that depend on `Ω_L`, given `H(Ω_S)`.
struct Evaluator<'a> {
    quad: &'a SccQuadratic,
    moments: &'a Moments,
    lambda1: f64,
    lambda2: f64,
}

impl Evaluator<'_> {
    fn h_diag(&self, omega: &DVector<f64>) -> DMatrix<f64> {
        let idx: Vec<usize> = (0..omega.len()).filter(|&j| omega[j] > 0.0).collect();
        let w = DMatrix::from_diagonal(&linalg::select_entries(omega, &idx));
        self.moments.apply_from_block(&idx, &w)
    }

    /// Smooth objective `f(D + L)` from `H(D)`, `H(L)`.
    fn smooth(&self, omega: &DVector<f64>, l: &LowRank, h_l: &DMatrix<f64>) -> f64 {
        let diag_part = self.quad.value(omega);
        // ⟨D, H(L)⟩ only needs the diagonal of H(L).
        let cross = (0..omega.len()).map(|j| omega[j] * h_l[(j, j)]).sum::<f64>();
        diag_part + cross - linalg::frob_dot(&l.matrix, &self.moments.c_outer)
            + 0.5 * linalg::frob_dot(&l.matrix, h_l)
    }

    fn total(&self, omega: &DVector<f64>, l: &LowRank, h_l: &DMatrix<f64>) -> f64 {
        self.smooth(omega, l, h_l) + self.lambda1 * omega.sum() + self.lambda2 * l.trace()
    }
}

pub(crate) fn solve_diag_lowrank(
    quad: &SccQuadratic,
    moments: &Moments,
    lambda1: f64,
    lambda2: f64,
    start: Option<(&DVector<f64>, &DMatrix<f64>)>,
    config: &SolverConfig,
) -> Result<(DiagPlusLowRank, SolveTrace)> {
    let d = quad.dim();
    let eval = Evaluator { quad, moments, lambda1, lambda2 };
    let (mut omega, mut low) = match start {
        Some((w, l)) => {
            if w.len() != d || l.nrows() != d {
                return Err(Error::DimensionMismatch("warm start has wrong shape".into()));
            }
            (w.map(|v| v.max(0.0)), LowRank::from_psd(&linalg::project_psd(l)))
        }
        None => (DVector::zeros(d), LowRank::zeros(d)),
    };
    let mut h_l = moments.apply_factor(&low.factor);
    let mut obj = eval.total(&omega, &low, &h_l);
    let mut values = vec![obj];
    let penalty = DVector::from_element(d, lambda1);
    let mut step = {
        let eye = DMatrix::<f64>::identity(d, d);
        let h = moments.apply_from_block(&(0..d).collect::<Vec<_>>(), &eye);
        let q = linalg::frob_dot(&eye, &h) / d as f64;
        if q > 0.0 { 1.0 / q } else { 1.0 }
    };
    let base_step = step;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        iterations += 1;
        // Diagonal block: exact nonnegative QP with b shifted by diag(H(L)).
        let shifted = DVector::from_fn(d, |j, _| quad.corr_sq[j] - h_l[(j, j)]);
        let (w, _) = nonneg_cd(
            &quad.gram_sq,
            &shifted,
            &penalty,
            0.0,
            Some(&omega),
            (config.rel_tol * 1e-3).max(1e-15),
            config.max_iter,
        )?;
        omega = w;
        let h_d = eval.h_diag(&omega);
        let obj_d = eval.total(&omega, &low, &h_l).min(obj);

        // Low-rank block: one proximal-gradient step.
        let grad = &h_d + &h_l - &moments.c_outer;
        let f_now = eval.smooth(&omega, &low, &h_l);
        let mut t = step;
        let mut accepted = None;
        while t >= base_step * 1e-14 {
            let cand = eigen_shrink(&(&low.matrix - &grad * t), t * lambda2);
            let diff = &cand.matrix - &low.matrix;
            let h_c = moments.apply_factor(&cand.factor);
            let f_c = eval.smooth(&omega, &cand, &h_c);
            let model = f_now + linalg::frob_dot(&grad, &diff) + linalg::frobenius_sq(&diff) / (2.0 * t);
            let total_c = f_c + lambda1 * omega.sum() + lambda2 * cand.trace();
            if f_c <= model + 1e-13 * obj_d.abs().max(1.0) && total_c <= obj_d {
                accepted = Some((cand, h_c, total_c));
                break;
            }
            t *= 0.5;
        }
        let new_obj = match accepted {
            Some((cand, h_c, total_c)) => {
                low = cand;
                h_l = h_c;
                step = t * 1.5;
                total_c
            }
            None => obj_d,
        };
        values.push(new_obj);
        let decrease = obj - new_obj;
        obj = new_obj;
        if decrease <= config.rel_tol * obj.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    let sparse = DiagonalCovariance::new(omega)?.snapped();
    let lowrank = FullCovariance::new(low.matrix)
        .map_err(|e| Error::Internal(format!("low-rank update left the PSD cone: {e}")))?;
    let active = sparse.support().len();
    let result = DiagPlusLowRank::new(sparse, lowrank)?;
    Ok((
        result,
        SolveTrace { objective_values: values, iterations, converged, active_set_size: active },
    ))
}

/// Largest eigenvalue of `C − H(Ω_S)`: above this `λ₂`, the low-rank part stays zero.
pub(crate) fn lowrank_zero_threshold(moments: &Moments, omega: &DVector<f64>) -> f64 {
    let idx: Vec<usize> = (0..omega.len()).filter(|&j| omega[j] > 0.0).collect();
    let w = DMatrix::from_diagonal(&linalg::select_entries(omega, &idx));
    let m = &moments.c_outer - moments.apply_from_block(&idx, &w);
    linalg::sym_eigen(&m).eigenvalues.max().max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::scc::fit_scc_diagonal;
    use crate::model::TaskData;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_tasks(m: usize, n: usize, d: usize, seed: u64) -> MultiTaskDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tasks = (0..m)
            .map(|_| {
                let x = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(&mut rng));
                let y = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
                TaskData::new(x, y)
            })
            .collect();
        MultiTaskDataset::new(tasks).unwrap()
    }

    #[test]
    fn huge_trace_weight_reduces_to_diagonal_coding() {
        let ds = random_tasks(5, 6, 4, 2);
        let cfg = SolverConfig::default()
            .with_lowrank_weights(3.0, 1e12)
            .with_rel_tol(1e-14);
        let (fit, trace) = fit_diag_lowrank(&ds, &cfg).unwrap();
        assert_eq!(fit.rank_estimate, 0);
        assert_eq!(fit.lowrank_part.matrix(), &DMatrix::zeros(4, 4));
        let (scc, _) = fit_scc_diagonal(&ds, &cfg.clone().with_lambda(3.0)).unwrap();
        assert!((fit.sparse_part.omega() - scc.omega()).amax() < 1e-8);
        assert!(trace.is_monotone(1e-12));
    }

    #[test]
    fn huge_diagonal_weight_leaves_only_lowrank() {
        let ds = random_tasks(5, 6, 4, 3);
        let cfg = SolverConfig::default().with_lowrank_weights(1e12, 1.0).with_max_iter(500);
        let (fit, trace) = fit_diag_lowrank(&ds, &cfg).unwrap();
        assert!(fit.sparse_part.support().is_empty());
        assert!(fit.lowrank_part.matrix().amax() > 0.0);
        assert!(trace.is_monotone(1e-12));
    }
}
