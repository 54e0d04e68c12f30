//! Sparse diagonal covariance coding.
//!
//! Restricting `Ω = diag(ω)` turns the Frobenius fit into the nonnegative
//! quadratic program `½ ωᵀAω − bᵀω + const + pᵀω`, with
//! `A_jk = Σ_ℓ (x_jᵀ x_k)²`, `b_j = Σ_ℓ (x_jᵀ y)²` and a linear penalty `p`.

use nalgebra::{DMatrix, DVector};

use super::SolveTrace;
use crate::error::{Error, Result};
use crate::model::{DiagonalCovariance, MultiTaskDataset, SolverConfig};

/// Expanded quadratic form of the diagonal coding objective.
#[derive(Debug, Clone, PartialEq)]
pub struct SccQuadratic {
    /// `A_jk = Σ_ℓ (x_j^(ℓ)ᵀ x_k^(ℓ))²`.
    pub gram_sq: DMatrix<f64>,
    /// `b_j = Σ_ℓ (x_j^(ℓ)ᵀ y^(ℓ))²`.
    pub corr_sq: DVector<f64>,
    /// `Σ_ℓ ‖y^(ℓ)‖⁴ / 2`.
    pub const_term: f64,
    /// `Σ_ℓ ‖x_j^(ℓ)‖²`, the diagonal of `Σ XᵀX`. Weights of the trace penalty.
    pub column_sq_norms: DVector<f64>,
}

pub fn build_scc_quadratic(dataset: &MultiTaskDataset) -> Result<SccQuadratic> {
    dataset.ensure_valid()?;
    let d = dataset.dim();
    let mut gram_sq = DMatrix::zeros(d, d);
    let mut corr_sq = DVector::zeros(d);
    let mut column_sq_norms = DVector::zeros(d);
    let mut const_term = 0.0;
    for t in dataset.tasks() {
        let g = t.design.tr_mul(&t.design);
        gram_sq.zip_apply(&g, |a, v| *a += v * v);
        let c = t.design.tr_mul(&t.response);
        corr_sq.zip_apply(&c, |a, v| *a += v * v);
        for j in 0..d {
            column_sq_norms[j] += g[(j, j)];
        }
        let yy = t.response.norm_squared();
        const_term += 0.5 * yy * yy;
    }
    Ok(SccQuadratic { gram_sq, corr_sq, const_term, column_sq_norms })
}

impl SccQuadratic {
    pub fn dim(&self) -> usize {
        self.corr_sq.len()
    }

    /// `½ ωᵀAω − bᵀω + const` (no penalty).
    pub fn value(&self, omega: &DVector<f64>) -> f64 {
        0.5 * omega.dot(&(&self.gram_sq * omega)) - self.corr_sq.dot(omega) + self.const_term
    }

    /// Penalty vector for the plain `λ Σ ω_j` regularizer.
    pub fn l1_penalty(&self, lambda: f64) -> DVector<f64> {
        DVector::from_element(self.dim(), lambda)
    }

    /// Penalty vector for `λ tr(Ω Σ XᵀX)` with diagonal `Ω`.
    pub fn trace_penalty(&self, lambda: f64) -> DVector<f64> {
        &self.column_sq_norms * lambda
    }

    /// Smallest `λ` for which the `λ Σ ω_j` problem has the all-zero solution.
    pub fn zero_threshold(&self) -> f64 {
        self.corr_sq.max().max(0.0)
    }

    /// Smallest `λ` for which the trace-penalized problem is solved by zero.
    pub fn trace_zero_threshold(&self) -> f64 {
        (0..self.dim())
            .filter(|&j| self.column_sq_norms[j] > 0.0)
            .map(|j| self.corr_sq[j] / self.column_sq_norms[j])
            .fold(0.0, f64::max)
    }

    /// Cyclic coordinate descent on the nonnegative program with linear penalty
    /// `penalty`, optionally warm-started.
    pub fn solve(
        &self,
        penalty: &DVector<f64>,
        start: Option<&DVector<f64>>,
        config: &SolverConfig,
    ) -> Result<(DiagonalCovariance, SolveTrace)> {
        let (omega, trace) = nonneg_cd(
            &self.gram_sq,
            &self.corr_sq,
            penalty,
            self.const_term,
            start,
            config.rel_tol,
            config.max_iter,
        )?;
        let cov = DiagonalCovariance::new(omega)?.snapped();
        let trace = SolveTrace { active_set_size: cov.support().len(), ..trace };
        Ok((cov, trace))
    }

    /// Largest KKT violation of `omega` for the given penalty, relative to the
    /// diagonal scale of `A`.
    pub fn kkt_violation(&self, omega: &DVector<f64>, penalty: &DVector<f64>) -> f64 {
        let grad = &self.gram_sq * omega - &self.corr_sq + penalty;
        let mut worst = 0.0_f64;
        for j in 0..self.dim() {
            let v = if omega[j] > 0.0 { grad[j].abs() } else { (-grad[j]).max(0.0) };
            worst = worst.max(v);
        }
        worst
    }
}

/// Minimizes `½ ωᵀAω − bᵀω + pᵀω + c0` over `ω ≥ 0` by cyclic coordinate
/// descent, feature index ascending. Every coordinate step is an exact
/// minimization, so the objective never increases.
pub(crate) fn nonneg_cd(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    penalty: &DVector<f64>,
    c0: f64,
    start: Option<&DVector<f64>>,
    rel_tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, SolveTrace)> {
    let d = b.len();
    if penalty.len() != d || a.nrows() != d || a.ncols() != d {
        return Err(Error::DimensionMismatch("quadratic program shapes disagree".into()));
    }
    let mut omega = match start {
        Some(s) if s.len() == d => s.map(|v| v.max(0.0)),
        Some(_) => return Err(Error::DimensionMismatch("warm start has wrong length".into())),
        None => DVector::zeros(d),
    };
    let linear = b - penalty;
    // grad = Aω − (b − p)
    let mut grad = a * &omega - &linear;
    // Without the constant, so the stopping rule sees the part that moves.
    let variable = |omega: &DVector<f64>, grad: &DVector<f64>| 0.5 * omega.dot(grad) - 0.5 * linear.dot(omega);
    let mut prev = variable(&omega, &grad);
    let mut values = vec![prev + c0];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        for j in 0..d {
            let ajj = a[(j, j)];
            let old = omega[j];
            let new = if ajj > 0.0 { (old - grad[j] / ajj).max(0.0) } else { 0.0 };
            let delta = new - old;
            if delta != 0.0 {
                omega[j] = new;
                grad.axpy(delta, &a.column(j), 1.0);
            }
        }
        let f = variable(&omega, &grad).min(prev);
        values.push(f + c0);
        let decrease = prev - f;
        prev = f;
        if decrease <= rel_tol * f.abs() {
            converged = true;
            break;
        }
    }
    let active = omega.iter().filter(|&&w| w > 0.0).count();
    Ok((
        omega,
        SolveTrace { objective_values: values, iterations, converged, active_set_size: active },
    ))
}

/// Sparse diagonal coding with penalty `λ Σ_j ω_j`.
pub fn fit_scc_diagonal(
    dataset: &MultiTaskDataset,
    config: &SolverConfig,
) -> Result<(DiagonalCovariance, SolveTrace)> {
    config.validate()?;
    let quad = build_scc_quadratic(dataset)?;
    quad.solve(&quad.l1_penalty(config.lambda), None, config)
}

/// Diagonal coding with the trace penalty `λ Σ_j ω_j Σ_ℓ ‖x_j^(ℓ)‖²`.
pub fn fit_scc_trace(
    dataset: &MultiTaskDataset,
    config: &SolverConfig,
) -> Result<(DiagonalCovariance, SolveTrace)> {
    config.validate()?;
    let quad = build_scc_quadratic(dataset)?;
    quad.solve(&quad.trace_penalty(config.lambda), None, config)
}
