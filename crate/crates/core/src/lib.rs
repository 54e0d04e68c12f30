//! Multi-task regression with a shared, sparse random-effects covariance.
//!
//! The two-step procedure first estimates a covariance `Ω` of the task
//! coefficients from the second moments `y yᵀ` of every task, then solves one
//! ridge problem per task with `Ω` as prior. Group Lasso and GLS-LS are
//! provided as baselines, together with closed-form identity-design solutions,
//! numerical checks of the prediction-error bounds, and a benchmark harness.

pub mod covariance;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod oracles;
pub mod regression;
pub mod theory;

pub use covariance::{
    build_scc_quadratic, covariance_from_json, covariance_to_json, fit_covariance, fit_diag_lowrank, fit_loo,
    fit_partial_full, fit_scc_diagonal, fit_scc_trace, CovarianceFit, SccQuadratic, SolveTrace,
};
pub use error::{Error, Result};
pub use model::{
    covariance_as_matrix, validate_dataset, CoefficientSet, CovarianceEstimate, CovarianceStructure,
    DiagPlusLowRank, DiagonalCovariance, FullCovariance, MultiTaskDataset, SolverConfig, TaskData, Violation,
};
pub use regression::{
    gls_ls_fit, group_lasso_fit, ridge_with_covariance, two_step_fit, GroupLassoResult, RidgeSolveOptions,
    TwoStepResult,
};
