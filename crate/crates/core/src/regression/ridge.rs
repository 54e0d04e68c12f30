//! Ridge regression with a shared covariance prior.
//!
//! `β = R (RᵀXᵀXR + λI)⁻¹ RᵀXᵀy` where `R Rᵀ = Ω` spans the range of `Ω`.
//! This is `(XᵀX + λΩ⁻¹)⁻¹Xᵀy` whenever `Ω` is invertible, and it gives the
//! pseudo-inverse semantics otherwise: directions outside the range of `Ω`
//! receive exactly zero weight.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{CovarianceEstimate, SolverConfig, TaskData};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RidgeSolveOptions {
    pub ridge_lambda: f64,
    /// Estimate a separate leave-one-task-out covariance for each task.
    pub use_loo: bool,
}

impl RidgeSolveOptions {
    pub fn new(ridge_lambda: f64) -> Self {
        Self { ridge_lambda, use_loo: false }
    }

    pub fn from_config(config: &SolverConfig) -> Self {
        Self::new(config.ridge_lambda)
    }

    pub fn with_loo(mut self, use_loo: bool) -> Self {
        self.use_loo = use_loo;
        self
    }
}

/// Range factor of a covariance estimate, computed once and reused per task.
#[derive(Debug, Clone)]
pub struct CovariancePrior {
    dim: usize,
    kind: PriorKind,
}

#[derive(Debug, Clone)]
enum PriorKind {
    /// Support indices with `sqrt(ω_j)`.
    Diagonal { idx: Vec<usize>, scale: DVector<f64> },
    /// Dense factor `R` (d × r).
    Dense(DMatrix<f64>),
}

impl CovariancePrior {
    pub fn new(estimate: &CovarianceEstimate) -> Self {
        let dim = estimate.dim();
        let kind = match estimate {
            CovarianceEstimate::Diagonal(c) => {
                let idx = c.support();
                let scale = DVector::from_iterator(idx.len(), idx.iter().map(|&j| c.omega()[j].sqrt()));
                PriorKind::Diagonal { idx, scale }
            }
            other => PriorKind::Dense(linalg::psd_range_factor(&other.as_matrix())),
        };
        Self { dim, kind }
    }

    pub fn rank(&self) -> usize {
        match &self.kind {
            PriorKind::Diagonal { idx, .. } => idx.len(),
            PriorKind::Dense(r) => r.ncols(),
        }
    }

    pub fn solve(&self, task: &TaskData, ridge_lambda: f64) -> Result<DVector<f64>> {
        if task.n_features() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "task has {} features, covariance has d = {}",
                task.n_features(),
                self.dim
            )));
        }
        if !(ridge_lambda >= 0.0) {
            return Err(Error::InvalidConfig(format!("ridge_lambda must be >= 0, got {ridge_lambda}")));
        }
        let mut beta = DVector::zeros(self.dim);
        if self.rank() == 0 {
            return Ok(beta);
        }
        match &self.kind {
            PriorKind::Diagonal { idx, scale } => {
                let mut z = linalg::select_columns(&task.design, idx);
                for (c, mut col) in z.column_iter_mut().enumerate() {
                    col *= scale[c];
                }
                let u = solve_reduced(&z, &task.response, ridge_lambda)?;
                for (c, &j) in idx.iter().enumerate() {
                    beta[j] = scale[c] * u[c];
                }
            }
            PriorKind::Dense(r) => {
                let z = &task.design * r;
                let u = solve_reduced(&z, &task.response, ridge_lambda)?;
                beta = r * u;
            }
        }
        Ok(beta)
    }
}

/// Solves `(ZᵀZ + λI) u = Zᵀy`.
fn solve_reduced(z: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    let r = z.ncols();
    let mut lhs = z.tr_mul(z);
    let rhs = z.tr_mul(y);
    if lambda == 0.0 {
        let eig = linalg::sym_eigen(&lhs);
        let top = eig.eigenvalues.max();
        let low = eig.eigenvalues.min();
        if !(top > 0.0) || low <= 1e-12 * top {
            return Err(Error::RankDeficient(format!(
                "design restricted to the covariance range is rank deficient ({r} directions, \
                 smallest Gram eigenvalue {low:e}); use ridge_lambda > 0"
            )));
        }
    }
    for i in 0..r {
        lhs[(i, i)] += lambda;
    }
    let chol = lhs
        .cholesky()
        .ok_or_else(|| Error::RankDeficient("reduced ridge system is not positive definite".into()))?;
    Ok(chol.solve(&rhs))
}

/// One task's coefficients under the covariance prior `omega_hat`.
pub fn ridge_with_covariance(
    task: &TaskData,
    omega_hat: &CovarianceEstimate,
    options: &RidgeSolveOptions,
) -> Result<DVector<f64>> {
    CovariancePrior::new(omega_hat).solve(task, options.ridge_lambda)
}
