//! Covariance estimation followed by per-task ridge regression.

use rayon::prelude::*;

use super::ridge::{CovariancePrior, RidgeSolveOptions};
use crate::covariance::{fit_covariance, fit_loo, SolveTrace};
use crate::error::Result;
use crate::model::{CoefficientSet, CovarianceEstimate, CovarianceStructure, MultiTaskDataset, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepResult {
    pub coefficients: CoefficientSet,
    /// One shared estimate, or one per task when leave-one-task-out is used.
    pub covariances: Vec<CovarianceEstimate>,
    pub traces: Vec<SolveTrace>,
}

impl TwoStepResult {
    /// The shared estimate, or the first task's estimate under leave-one-task-out.
    pub fn covariance(&self) -> &CovarianceEstimate {
        &self.covariances[0]
    }
}

/// Step 1 uses `config.lambda` (or `lambda1`/`lambda2`); step 2 uses
/// `options.ridge_lambda`.
pub fn two_step_fit(
    dataset: &MultiTaskDataset,
    config: &SolverConfig,
    structure: CovarianceStructure,
    options: &RidgeSolveOptions,
) -> Result<TwoStepResult> {
    dataset.ensure_valid()?;
    if options.use_loo {
        let fits: Vec<_> = (0..dataset.n_tasks())
            .into_par_iter()
            .map(|l| fit_loo(dataset, l, config, structure))
            .collect::<Result<_>>()?;
        let betas = fits
            .par_iter()
            .zip(dataset.tasks())
            .map(|(f, t)| CovariancePrior::new(&f.estimate).solve(t, options.ridge_lambda))
            .collect::<Result<Vec<_>>>()?;
        let (covariances, traces) = fits.into_iter().map(|f| (f.estimate, f.trace)).unzip();
        return Ok(TwoStepResult { coefficients: CoefficientSet::new(betas, dataset.dim())?, covariances, traces });
    }
    let fit = fit_covariance(dataset, config, structure)?;
    let coefficients = ridge_all_tasks(dataset, &fit.estimate, options.ridge_lambda)?;
    Ok(TwoStepResult { coefficients, covariances: vec![fit.estimate], traces: vec![fit.trace] })
}

/// Step 2 alone: every task regressed under the same covariance prior.
pub fn ridge_all_tasks(
    dataset: &MultiTaskDataset,
    estimate: &CovarianceEstimate,
    ridge_lambda: f64,
) -> Result<CoefficientSet> {
    let prior = CovariancePrior::new(estimate);
    let betas = dataset
        .tasks()
        .par_iter()
        .map(|t| prior.solve(t, ridge_lambda))
        .collect::<Result<Vec<_>>>()?;
    CoefficientSet::new(betas, dataset.dim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TaskData;
    use nalgebra::{DMatrix, DVector};

    #[test]
    fn noiseless_full_rank_recovers_truth() {
        let x1 = DMatrix::from_row_slice(4, 3, &[1.0, 0.2, 0.0, 0.1, 1.0, 0.3, 0.0, 0.4, 1.0, 0.5, 0.5, 0.5]);
        let x2 = DMatrix::from_row_slice(4, 3, &[0.9, -0.1, 0.2, 0.3, 1.1, 0.0, -0.2, 0.1, 0.8, 0.4, 0.6, -0.3]);
        let b1 = DVector::from_vec(vec![1.0, -0.5, 2.0]);
        let b2 = DVector::from_vec(vec![0.7, 1.5, -1.0]);
        let ds = MultiTaskDataset::new(vec![
            TaskData::new(x1.clone(), &x1 * &b1),
            TaskData::new(x2.clone(), &x2 * &b2),
        ])
        .unwrap();
        let cfg = SolverConfig::default().with_lambda(0.0);
        let res = two_step_fit(&ds, &cfg, CovarianceStructure::Diagonal, &RidgeSolveOptions::new(0.0)).unwrap();
        assert!((&res.coefficients.betas()[0] - b1).amax() < 1e-9);
        assert!((&res.coefficients.betas()[1] - b2).amax() < 1e-9);
    }

    #[test]
    fn loo_gives_one_covariance_per_task() {
        let x = DMatrix::identity(3, 3);
        let ds = MultiTaskDataset::new(
            (0..4)
                .map(|l| TaskData::new(x.clone(), DVector::from_fn(3, |j, _| (l + j) as f64 * 0.5 - 1.0)))
                .collect(),
        )
        .unwrap();
        let cfg = SolverConfig::default().with_lambda(0.1);
        let res = two_step_fit(
            &ds,
            &cfg,
            CovarianceStructure::Diagonal,
            &RidgeSolveOptions::new(0.1).with_loo(true),
        )
        .unwrap();
        assert_eq!(res.covariances.len(), 4);
        assert_eq!(res.traces.len(), 4);
    }
}
