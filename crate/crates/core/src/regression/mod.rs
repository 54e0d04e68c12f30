//! Step-2 coefficient estimation and the group Lasso baselines.

mod gls_ls;
mod group_lasso;
mod ridge;
mod two_step;

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

pub use gls_ls::{gls_ls_fit, least_squares_on_support};
pub use group_lasso::{
    group_lasso_fit, group_lasso_kkt_violation, group_lasso_objective, group_lasso_zero_threshold,
    variational_objective, GroupLassoResult,
};
pub use ridge::{ridge_with_covariance, CovariancePrior, RidgeSolveOptions};
pub use two_step::{ridge_all_tasks, two_step_fit, TwoStepResult};

pub(crate) use group_lasso::group_lasso_solve;

use crate::error::{Error, Result};
use crate::model::CoefficientSet;

/// JSON form of a [`CoefficientSet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub m: usize,
    pub d: usize,
    pub betas: Vec<Vec<f64>>,
    pub support: Vec<usize>,
}

impl CoefficientRecord {
    pub fn from_set(set: &CoefficientSet) -> Self {
        Self {
            m: set.n_tasks(),
            d: set.dim(),
            betas: set.betas().iter().map(|b| b.iter().copied().collect()).collect(),
            support: set.support().to_vec(),
        }
    }

    /// The stored `support` is informational; it is recomputed from `betas`.
    pub fn to_set(&self) -> Result<CoefficientSet> {
        if self.betas.len() != self.m {
            return Err(Error::Format(format!("expected {} coefficient vectors, found {}", self.m, self.betas.len())));
        }
        let betas = self.betas.iter().map(|b| DVector::from_column_slice(b)).collect();
        CoefficientSet::new(betas, self.d)
    }
}

pub fn coefficients_to_json(set: &CoefficientSet) -> Result<String> {
    Ok(serde_json::to_string_pretty(&CoefficientRecord::from_set(set))?)
}

pub fn coefficients_from_json(text: &str) -> Result<CoefficientSet> {
    serde_json::from_str::<CoefficientRecord>(text)?.to_set()
}

pub fn load_coefficients(path: &Path) -> Result<CoefficientSet> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    coefficients_from_json(&text)
}

pub fn save_coefficients(set: &CoefficientSet, path: &Path) -> Result<()> {
    std::fs::write(path, coefficients_to_json(set)?).map_err(|source| Error::Io { path: path.display().to_string(), source })
}
