//! Step-1 estimators of the shared coefficient covariance `Ω`.

mod lowrank;
pub(crate) mod moments;
mod partial_full;
mod scc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use lowrank::fit_diag_lowrank;
pub use partial_full::fit_partial_full;
pub use scc::{build_scc_quadratic, fit_scc_diagonal, fit_scc_trace, SccQuadratic};

pub(crate) use lowrank::{lowrank_zero_threshold, solve_diag_lowrank};
pub(crate) use partial_full::{partial_full_zero_threshold, solve_partial_full};

use crate::error::{Error, Result};
use crate::model::{
    CovarianceEstimate, CovarianceStructure, DiagPlusLowRank, DiagonalCovariance, FullCovariance,
    MultiTaskDataset, SolverConfig,
};

/// Per-iteration record of an iterative solve.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveTrace {
    /// Objective at the start point followed by one value per iteration.
    pub objective_values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub active_set_size: usize,
}

impl SolveTrace {
    pub fn final_objective(&self) -> f64 {
        self.objective_values.last().copied().unwrap_or(f64::NAN)
    }

    /// True when no value exceeds its predecessor by more than `rel_slack` of
    /// its magnitude.
    pub fn is_monotone(&self, rel_slack: f64) -> bool {
        self.objective_values
            .windows(2)
            .all(|w| w[1] <= w[0] + rel_slack * w[0].abs().max(1.0))
    }
}

/// A fitted covariance with the trace of the solve that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceFit {
    pub estimate: CovarianceEstimate,
    pub trace: SolveTrace,
}

/// Runs the estimator selected by `structure`. For [`CovarianceStructure::DiagLowRank`]
/// the weights are `config.lambda1` and `config.lambda2`; every other structure
/// uses `config.lambda`.
pub fn fit_covariance(
    dataset: &MultiTaskDataset,
    config: &SolverConfig,
    structure: CovarianceStructure,
) -> Result<CovarianceFit> {
    let (estimate, trace) = match structure {
        CovarianceStructure::Diagonal => {
            let (c, t) = fit_scc_diagonal(dataset, config)?;
            (CovarianceEstimate::Diagonal(c), t)
        }
        CovarianceStructure::DiagonalTrace => {
            let (c, t) = fit_scc_trace(dataset, config)?;
            (CovarianceEstimate::Diagonal(c), t)
        }
        CovarianceStructure::PartialFull => {
            let (c, t) = fit_partial_full(dataset, config)?;
            (CovarianceEstimate::Full(c), t)
        }
        CovarianceStructure::DiagLowRank => {
            let (c, t) = fit_diag_lowrank(dataset, config)?;
            (CovarianceEstimate::DiagLowRank(c), t)
        }
    };
    Ok(CovarianceFit { estimate, trace })
}

/// Fits the chosen estimator with task `exclude_task` left out, so the result
/// is independent of that task's response.
pub fn fit_loo(
    dataset: &MultiTaskDataset,
    exclude_task: usize,
    config: &SolverConfig,
    structure: CovarianceStructure,
) -> Result<CovarianceFit> {
    if dataset.n_tasks() < 2 {
        return Err(Error::InvalidConfig(
            "leave-one-task-out needs at least two tasks".into(),
        ));
    }
    let rest = dataset.without_task(exclude_task)?;
    fit_covariance(&rest, config, structure)
}

/// JSON form of a covariance estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceRecord {
    pub structure: String,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<Vec<f64>>,
    /// Row-major `d × d` matrix (the low-rank part for `diag_lowrank`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_estimate: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_objective: Option<f64>,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        out.extend(m.row(i).iter());
    }
    out
}

fn matrix_from_row_major(d: usize, values: &[f64]) -> Result<DMatrix<f64>> {
    if values.len() != d * d {
        return Err(Error::Format(format!(
            "matrix has {} entries, expected {}",
            values.len(),
            d * d
        )));
    }
    Ok(DMatrix::from_row_slice(d, d, values))
}

impl CovarianceRecord {
    pub fn from_estimate(estimate: &CovarianceEstimate, trace: Option<&SolveTrace>) -> Self {
        let d = estimate.dim();
        let mut rec = match estimate {
            CovarianceEstimate::Diagonal(c) => CovarianceRecord {
                structure: "diagonal".into(),
                d,
                omega: Some(c.omega().iter().copied().collect()),
                matrix: None,
                rank_estimate: None,
                iterations: None,
                converged: None,
                final_objective: None,
            },
            CovarianceEstimate::Full(c) => CovarianceRecord {
                structure: "full".into(),
                d,
                omega: None,
                matrix: Some(row_major(c.matrix())),
                rank_estimate: None,
                iterations: None,
                converged: None,
                final_objective: None,
            },
            CovarianceEstimate::DiagLowRank(c) => CovarianceRecord {
                structure: "diag_lowrank".into(),
                d,
                omega: Some(c.sparse_part.omega().iter().copied().collect()),
                matrix: Some(row_major(c.lowrank_part.matrix())),
                rank_estimate: Some(c.rank_estimate),
                iterations: None,
                converged: None,
                final_objective: None,
            },
        };
        if let Some(t) = trace {
            rec.iterations = Some(t.iterations);
            rec.converged = Some(t.converged);
            rec.final_objective = Some(t.final_objective());
        }
        rec
    }

    pub fn to_estimate(&self) -> Result<CovarianceEstimate> {
        let omega = || -> Result<DiagonalCovariance> {
            let w = self
                .omega
                .as_ref()
                .ok_or_else(|| Error::Format(format!("{} record lacks omega", self.structure)))?;
            if w.len() != self.d {
                return Err(Error::Format(format!("omega has {} entries, expected {}", w.len(), self.d)));
            }
            DiagonalCovariance::new(DVector::from_column_slice(w))
        };
        let matrix = || -> Result<FullCovariance> {
            let m = self
                .matrix
                .as_ref()
                .ok_or_else(|| Error::Format(format!("{} record lacks matrix", self.structure)))?;
            FullCovariance::new(matrix_from_row_major(self.d, m)?)
        };
        match self.structure.as_str() {
            "diagonal" => Ok(CovarianceEstimate::Diagonal(omega()?)),
            "full" => Ok(CovarianceEstimate::Full(matrix()?)),
            "diag_lowrank" => Ok(CovarianceEstimate::DiagLowRank(DiagPlusLowRank::new(omega()?, matrix()?)?)),
            other => Err(Error::Format(format!("unknown covariance structure {other:?}"))),
        }
    }
}

pub fn covariance_to_json(estimate: &CovarianceEstimate, trace: Option<&SolveTrace>) -> Result<String> {
    Ok(serde_json::to_string_pretty(&CovarianceRecord::from_estimate(estimate, trace))?)
}

pub fn covariance_from_json(text: &str) -> Result<CovarianceEstimate> {
    let rec: CovarianceRecord = serde_json::from_str(text)?;
    rec.to_estimate()
}
