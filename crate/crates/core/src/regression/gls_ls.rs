//! Group Lasso for selection, then per-task least squares on the selected rows.

use nalgebra::DVector;

use super::group_lasso::group_lasso_solve;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{CoefficientSet, MultiTaskDataset, SolverConfig};

pub fn gls_ls_fit(dataset: &MultiTaskDataset, lambda_gl: f64, config: &SolverConfig) -> Result<CoefficientSet> {
    let gl = group_lasso_solve(dataset, lambda_gl, None, config)?;
    least_squares_on_support(dataset, gl.coefficients.support())
}

/// Per-task unregularized least squares restricted to `support`.
pub fn least_squares_on_support(dataset: &MultiTaskDataset, support: &[usize]) -> Result<CoefficientSet> {
    let d = dataset.dim();
    let mut betas = Vec::with_capacity(dataset.n_tasks());
    for (l, task) in dataset.tasks().iter().enumerate() {
        let mut beta = DVector::zeros(d);
        if !support.is_empty() {
            let z = linalg::select_columns(&task.design, support);
            let gram = z.tr_mul(&z);
            let eig = linalg::sym_eigen(&gram);
            let top = eig.eigenvalues.max();
            let low = eig.eigenvalues.min();
            if support.len() > task.n_samples() || !(top > 0.0) || low <= 1e-12 * top {
                return Err(Error::RankDeficient(format!(
                    "task {l}: design restricted to the {} selected features is rank deficient \
                     (n = {}, smallest Gram eigenvalue {low:e})",
                    support.len(),
                    task.n_samples()
                )));
            }
            let chol = gram.cholesky().ok_or_else(|| {
                Error::RankDeficient(format!("task {l}: restricted Gram matrix is not positive definite"))
            })?;
            let u = chol.solve(&z.tr_mul(&task.response));
            for (c, &j) in support.iter().enumerate() {
                beta[j] = u[c];
            }
        }
        betas.push(beta);
    }
    CoefficientSet::new(betas, d)
}
