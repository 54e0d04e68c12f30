//! Domain types shared by every solver.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// One regression task: an `n × d` design and a length-`n` response.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub design: DMatrix<f64>,
    pub response: DVector<f64>,
}

impl TaskData {
    pub fn new(design: DMatrix<f64>, response: DVector<f64>) -> Self {
        Self { design, response }
    }

    pub fn n_samples(&self) -> usize {
        self.design.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.design.ncols()
    }

    /// Keeps the listed rows, in order.
    pub fn rows(&self, idx: &[usize]) -> TaskData {
        let d = self.design.ncols();
        let design = DMatrix::from_fn(idx.len(), d, |i, j| self.design[(idx[i], j)]);
        let response = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.response[i]));
        TaskData { design, response }
    }

    pub fn predict(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.design * beta
    }
}

/// A single invariant violation found by [`MultiTaskDataset::validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoTasks,
    DimensionMismatch { task: usize, expected: usize, found: usize },
    RowCountMismatch { task: usize, design_rows: usize, response_len: usize },
    NonFiniteDesign { task: usize },
    NonFiniteResponse { task: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoTasks => write!(f, "dataset has no tasks"),
            Violation::DimensionMismatch { task, expected, found } => write!(
                f,
                "dimension mismatch: task {task} has {found} columns, expected {expected}"
            ),
            Violation::RowCountMismatch { task, design_rows, response_len } => write!(
                f,
                "row count mismatch: task {task} design has {design_rows} rows but response has {response_len} entries"
            ),
            Violation::NonFiniteDesign { task } => {
                write!(f, "non-finite value in design of task {task}")
            }
            Violation::NonFiniteResponse { task } => {
                write!(f, "non-finite value in response of task {task}")
            }
        }
    }
}

/// `m` regression tasks sharing the feature dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiTaskDataset {
    tasks: Vec<TaskData>,
    dim: usize,
}

impl MultiTaskDataset {
    /// Builds a dataset and rejects it if any invariant fails. The shared
    /// dimension is taken from the first task.
    pub fn new(tasks: Vec<TaskData>) -> Result<Self> {
        let dim = tasks.first().map(|t| t.n_features()).unwrap_or(0);
        let ds = Self::new_unchecked(tasks, dim);
        ds.ensure_valid()?;
        Ok(ds)
    }

    /// Builds a dataset without checking invariants; use [`validate`](Self::validate)
    /// to inspect it.
    pub fn new_unchecked(tasks: Vec<TaskData>, dim: usize) -> Self {
        Self { tasks, dim }
    }

    pub fn tasks(&self) -> &[TaskData] {
        &self.tasks
    }

    pub fn task(&self, i: usize) -> &TaskData {
        &self.tasks[i]
    }

    pub fn n_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Lists every invariant violation. Empty iff the dataset is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.tasks.is_empty() {
            out.push(Violation::NoTasks);
        }
        for (i, t) in self.tasks.iter().enumerate() {
            if t.design.ncols() != self.dim {
                out.push(Violation::DimensionMismatch {
                    task: i,
                    expected: self.dim,
                    found: t.design.ncols(),
                });
            }
            if t.design.nrows() != t.response.len() {
                out.push(Violation::RowCountMismatch {
                    task: i,
                    design_rows: t.design.nrows(),
                    response_len: t.response.len(),
                });
            }
            if !linalg::all_finite(t.design.iter()) {
                out.push(Violation::NonFiniteDesign { task: i });
            }
            if !linalg::all_finite(t.response.iter()) {
                out.push(Violation::NonFiniteResponse { task: i });
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            let msg: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            Err(Error::InvalidDataset(msg.join("; ")))
        }
    }

    /// The dataset with task `exclude` removed.
    pub fn without_task(&self, exclude: usize) -> Result<Self> {
        if exclude >= self.tasks.len() {
            return Err(Error::InvalidConfig(format!(
                "task index {exclude} out of range for {} tasks",
                self.tasks.len()
            )));
        }
        let tasks = self
            .tasks
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != exclude)
            .map(|(_, t)| t.clone())
            .collect();
        Ok(Self::new_unchecked(tasks, self.dim))
    }

    /// Splits every task into a leading block of `ceil(frac * n)` rows and the
    /// remainder. `frac >= 1` puts everything in the first part.
    pub fn split_rows(&self, frac: f64) -> (Self, Self) {
        let mut first = Vec::with_capacity(self.tasks.len());
        let mut second = Vec::with_capacity(self.tasks.len());
        for t in &self.tasks {
            let n = t.n_samples();
            let cut = ((frac * n as f64).ceil() as usize).min(n);
            let head: Vec<usize> = (0..cut).collect();
            let tail: Vec<usize> = (cut..n).collect();
            first.push(t.rows(&head));
            second.push(t.rows(&tail));
        }
        (
            Self::new_unchecked(first, self.dim),
            Self::new_unchecked(second, self.dim),
        )
    }

    /// Applies the same column permutation to every task: new column `j` is old
    /// column `perm[j]`.
    pub fn permute_features(&self, perm: &[usize]) -> Self {
        let tasks = self
            .tasks
            .iter()
            .map(|t| TaskData::new(linalg::select_columns(&t.design, perm), t.response.clone()))
            .collect();
        Self::new_unchecked(tasks, self.dim)
    }

    /// Scales every design column to unit mean square, task by task. Returns the
    /// scaled dataset and the per-task column scales that were divided out.
    pub fn standardized(&self) -> (Self, Vec<DVector<f64>>) {
        let mut scales = Vec::with_capacity(self.tasks.len());
        let tasks = self
            .tasks
            .iter()
            .map(|t| {
                let n = t.n_samples().max(1) as f64;
                let s = DVector::from_iterator(
                    self.dim,
                    t.design.column_iter().map(|c| {
                        let rms = (c.norm_squared() / n).sqrt();
                        if rms > 0.0 {
                            rms
                        } else {
                            1.0
                        }
                    }),
                );
                let mut x = t.design.clone();
                for (j, mut col) in x.column_iter_mut().enumerate() {
                    col /= s[j];
                }
                scales.push(s);
                TaskData::new(x, t.response.clone())
            })
            .collect();
        (Self::new_unchecked(tasks, self.dim), scales)
    }
}

/// Free-function form of [`MultiTaskDataset::validate`].
pub fn validate_dataset(dataset: &MultiTaskDataset) -> Vec<Violation> {
    dataset.validate()
}

/// Relative threshold below which solver output entries are snapped to zero.
pub const SUPPORT_SNAP: f64 = 1e-10;

/// `Ω = diag(ω)` with `ω ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalCovariance {
    omega: DVector<f64>,
}

impl DiagonalCovariance {
    pub fn new(omega: DVector<f64>) -> Result<Self> {
        if !linalg::all_finite(omega.iter()) {
            return Err(Error::InvalidConfig("omega has non-finite entries".into()));
        }
        if let Some(j) = omega.iter().position(|&w| w < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "omega[{j}] = {} is negative",
                omega[j]
            )));
        }
        Ok(Self { omega })
    }

    pub fn zeros(d: usize) -> Self {
        Self { omega: DVector::zeros(d) }
    }

    pub fn omega(&self) -> &DVector<f64> {
        &self.omega
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    /// Indices with strictly positive variance.
    pub fn support(&self) -> Vec<usize> {
        (0..self.omega.len()).filter(|&j| self.omega[j] > 0.0).collect()
    }

    /// Entries below `SUPPORT_SNAP * max(ω)` become exactly zero.
    pub fn snapped(mut self) -> Self {
        let top = self.omega.max();
        let cut = SUPPORT_SNAP * top;
        for w in self.omega.iter_mut() {
            if *w <= cut {
                *w = 0.0;
            }
        }
        self
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.omega)
    }
}

/// Symmetric positive semi-definite `d × d` covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct FullCovariance {
    matrix: DMatrix<f64>,
}

impl FullCovariance {
    /// Checks symmetry and PSD within tolerance, then stores the symmetrized matrix.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "covariance must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !linalg::all_finite(matrix.iter()) {
            return Err(Error::InvalidConfig("covariance has non-finite entries".into()));
        }
        let asym = linalg::max_asymmetry(&matrix);
        let tol = linalg::symmetry_tolerance(&matrix);
        if asym > tol {
            return Err(Error::NotSymmetric { asymmetry: asym, tolerance: tol });
        }
        let matrix = linalg::symmetrize(&matrix);
        if matrix.nrows() > 0 {
            let eig = linalg::sym_eigen(&matrix);
            let lo = eig.eigenvalues.min();
            let hi = eig.eigenvalues.max();
            let tol = linalg::psd_tolerance(hi);
            if lo < -tol {
                return Err(Error::NotPsd { min_eigenvalue: lo, tolerance: tol });
            }
        }
        Ok(Self { matrix })
    }

    pub fn zeros(d: usize) -> Self {
        Self { matrix: DMatrix::zeros(d, d) }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Rows with nonzero Euclidean norm.
    pub fn row_support(&self) -> Vec<usize> {
        (0..self.dim())
            .filter(|&k| self.matrix.row(k).iter().any(|&v| v != 0.0))
            .collect()
    }

    /// Number of eigenvalues above the PSD tolerance.
    pub fn numerical_rank(&self) -> usize {
        if self.dim() == 0 {
            return 0;
        }
        let eig = linalg::sym_eigen(&self.matrix);
        let tol = linalg::psd_tolerance(eig.eigenvalues.max());
        eig.eigenvalues.iter().filter(|&&l| l > tol).count()
    }
}

/// `Ω = Ω_S + Ω_L` with a nonnegative diagonal part and a PSD low-rank part.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagPlusLowRank {
    pub sparse_part: DiagonalCovariance,
    pub lowrank_part: FullCovariance,
    pub rank_estimate: usize,
}

impl DiagPlusLowRank {
    pub fn new(sparse_part: DiagonalCovariance, lowrank_part: FullCovariance) -> Result<Self> {
        if sparse_part.dim() != lowrank_part.dim() {
            return Err(Error::DimensionMismatch(format!(
                "diagonal part has d = {}, low-rank part has d = {}",
                sparse_part.dim(),
                lowrank_part.dim()
            )));
        }
        let rank_estimate = if linalg::max_abs(lowrank_part.matrix()) == 0.0 {
            0
        } else {
            lowrank_part.numerical_rank()
        };
        Ok(Self { sparse_part, lowrank_part, rank_estimate })
    }

    pub fn dim(&self) -> usize {
        self.sparse_part.dim()
    }
}

/// Which step-1 estimator produced (or should produce) a covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceStructure {
    /// Sparse diagonal coding with an `λ Σ ω_j` penalty.
    Diagonal,
    /// Diagonal coding with the trace penalty `λ tr(Ω Σ XᵀX)`.
    DiagonalTrace,
    /// Full PSD covariance with a row-group penalty.
    PartialFull,
    /// Diagonal plus low-rank decomposition.
    DiagLowRank,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceEstimate {
    Diagonal(DiagonalCovariance),
    Full(FullCovariance),
    DiagLowRank(DiagPlusLowRank),
}

impl CovarianceEstimate {
    pub fn dim(&self) -> usize {
        match self {
            CovarianceEstimate::Diagonal(c) => c.dim(),
            CovarianceEstimate::Full(c) => c.dim(),
            CovarianceEstimate::DiagLowRank(c) => c.dim(),
        }
    }

    /// Dense symmetric `d × d` form of the estimate.
    pub fn as_matrix(&self) -> DMatrix<f64> {
        match self {
            CovarianceEstimate::Diagonal(c) => c.to_matrix(),
            CovarianceEstimate::Full(c) => c.matrix().clone(),
            CovarianceEstimate::DiagLowRank(c) => {
                c.sparse_part.to_matrix() + c.lowrank_part.matrix()
            }
        }
    }

    /// Features with a nonzero diagonal entry in the materialized matrix.
    pub fn support(&self) -> Vec<usize> {
        match self {
            CovarianceEstimate::Diagonal(c) => c.support(),
            CovarianceEstimate::Full(c) => c.row_support(),
            CovarianceEstimate::DiagLowRank(_) => {
                let m = self.as_matrix();
                (0..m.nrows()).filter(|&j| m[(j, j)] > 0.0).collect()
            }
        }
    }
}

/// Covariance as a dense matrix.
pub fn covariance_as_matrix(estimate: &CovarianceEstimate) -> DMatrix<f64> {
    estimate.as_matrix()
}

/// Per-task coefficient vectors plus their joint support.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    betas: Vec<DVector<f64>>,
    support: Vec<usize>,
}

impl CoefficientSet {
    pub fn new(betas: Vec<DVector<f64>>, d: usize) -> Result<Self> {
        for (l, b) in betas.iter().enumerate() {
            if b.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient vector {l} has length {}, expected {d}",
                    b.len()
                )));
            }
            if !linalg::all_finite(b.iter()) {
                return Err(Error::InvalidConfig(format!(
                    "coefficient vector {l} has non-finite entries"
                )));
            }
        }
        let support = (0..d)
            .filter(|&j| betas.iter().any(|b| b[j] != 0.0))
            .collect();
        Ok(Self { betas, support })
    }

    pub fn zeros(m: usize, d: usize) -> Self {
        Self { betas: vec![DVector::zeros(d); m], support: Vec::new() }
    }

    pub fn betas(&self) -> &[DVector<f64>] {
        &self.betas
    }

    pub fn n_tasks(&self) -> usize {
        self.betas.len()
    }

    pub fn dim(&self) -> usize {
        self.betas.first().map(|b| b.len()).unwrap_or(0)
    }

    /// Features with any exactly nonzero coefficient.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// `m × d` matrix with one task per row.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let d = self.dim();
        DMatrix::from_fn(self.betas.len(), d, |l, j| self.betas[l][j])
    }

    /// Euclidean norm of each feature row across tasks.
    pub fn row_norms(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| self.betas.iter().map(|b| b[j] * b[j]).sum::<f64>().sqrt())
            .collect()
    }

    /// Features whose row norm exceeds `rel * max row norm`.
    pub fn thresholded_support(&self, rel: f64) -> Vec<usize> {
        let norms = self.row_norms();
        let top = norms.iter().cloned().fold(0.0_f64, f64::max);
        if top == 0.0 {
            return Vec::new();
        }
        (0..norms.len()).filter(|&j| norms[j] > rel * top).collect()
    }
}

/// Regularization weights and stopping rules for every solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Covariance-step penalty. Plays the role of the noise variance in the
    /// trace-penalized estimator.
    pub lambda: f64,
    /// Step-2 ridge weight.
    pub ridge_lambda: f64,
    /// Diagonal-part weight for the diagonal + low-rank model.
    pub lambda1: f64,
    /// Trace-norm weight for the diagonal + low-rank model.
    pub lambda2: f64,
    /// Per-row weights of the partial-full penalty. `None` means all ones.
    pub gamma: Option<Vec<f64>>,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.0,
            ridge_lambda: 0.0,
            lambda1: 0.0,
            lambda2: 0.0,
            gamma: None,
            rel_tol: 1e-8,
            max_iter: 10_000,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_ridge_lambda(mut self, ridge_lambda: f64) -> Self {
        self.ridge_lambda = ridge_lambda;
        self
    }

    pub fn with_lowrank_weights(mut self, lambda1: f64, lambda2: f64) -> Self {
        self.lambda1 = lambda1;
        self.lambda2 = lambda2;
        self
    }

    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("lambda", self.lambda),
            ("ridge_lambda", self.ridge_lambda),
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
        ];
        for (name, w) in weights {
            if !(w >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0, got {w}")));
            }
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidConfig("rel_tol must be > 0".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be >= 1".into()));
        }
        if let Some(g) = &self.gamma {
            if g.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::InvalidConfig("gamma entries must be > 0".into()));
            }
        }
        Ok(())
    }

    /// Row weights for dimension `d`.
    pub fn gamma_for(&self, d: usize) -> Result<Vec<f64>> {
        match &self.gamma {
            None => Ok(vec![1.0; d]),
            Some(g) if g.len() == d => Ok(g.clone()),
            Some(g) => Err(Error::DimensionMismatch(format!(
                "gamma has length {}, expected {d}",
                g.len()
            ))),
        }
    }
}
