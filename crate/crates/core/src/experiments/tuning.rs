//! Method registry and regularization selection.
//!
//! In cross-validation mode each method is fitted along a descending log grid
//! of `grid_size` values spanning `[1e-3, 1] × λ_max`, where `λ_max` is the
//! smallest penalty giving the all-zero fit. The trailing `holdout_fraction`
//! of every task's rows is held out, the grid point with the smallest held-out
//! squared error is kept, and the method is refitted on all rows at the same
//! relative grid position. Paths are warm-started and stop once `patience`
//! consecutive grid points fail to improve on the best one.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::moments::Moments;
use crate::covariance::{
    build_scc_quadratic, lowrank_zero_threshold, partial_full_zero_threshold, solve_diag_lowrank,
    solve_partial_full, SccQuadratic,
};
use crate::error::{Error, Result};
use crate::model::{CoefficientSet, CovarianceEstimate, DiagonalCovariance, MultiTaskDataset, SolverConfig};
use crate::regression::{group_lasso_solve, group_lasso_zero_threshold, least_squares_on_support, ridge_all_tasks};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Two-step with the `λ Σ ω_j` diagonal estimator.
    Scc,
    /// Two-step with the trace-penalized diagonal estimator.
    Scct,
    Gl,
    Glsls,
    /// Two-step with the partial-full estimator.
    Pfc,
    /// Two-step with the diagonal + low-rank estimator.
    Dlr,
}

impl Method {
    pub const ALL: [Method; 6] = [Method::Scc, Method::Scct, Method::Gl, Method::Glsls, Method::Pfc, Method::Dlr];

    pub fn key(self) -> &'static str {
        match self {
            Method::Scc => "scc",
            Method::Scct => "scct",
            Method::Gl => "gl",
            Method::Glsls => "glsls",
            Method::Pfc => "pfc",
            Method::Dlr => "dlr",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Method::Scc => "Sparse diagonal covariance",
            Method::Scct => "Sparse diagonal covariance (trace)",
            Method::Gl => "Standard group lasso",
            Method::Glsls => "GLS-LS",
            Method::Pfc => "Partial full covariance",
            Method::Dlr => "Diag+Low-rank covariance",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.key() == s.trim())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method '{s}' (expected scc, scct, gl, glsls, pfc or dlr)")))
    }
}

pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

/// How the regularization weights are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "mode", content = "value")]
pub enum LambdaMode {
    /// Held-out selection along the log grid.
    Cv,
    /// Noise-variance level `v`; see [`fixed_weights`] for the per-method mapping.
    Fixed(f64),
}

impl fmt::Display for LambdaMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LambdaMode::Cv => f.write_str("cv"),
            LambdaMode::Fixed(v) => write!(f, "fixed:{v}"),
        }
    }
}

impl FromStr for LambdaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "cv" {
            return Ok(LambdaMode::Cv);
        }
        if let Some(v) = s.strip_prefix("fixed:") {
            let v: f64 = v
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("cannot parse lambda value in '{s}'")))?;
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("fixed lambda must be >= 0, got {v}")));
            }
            return Ok(LambdaMode::Fixed(v));
        }
        Err(Error::InvalidConfig(format!("lambda mode must be 'cv' or 'fixed:<v>', got '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    pub lambda_mode: LambdaMode,
    pub grid_size: usize,
    pub holdout_fraction: f64,
    pub patience: usize,
    /// Ridge weight of the second step; `None` ties it to the covariance
    /// penalty (`λ / scale`, the noise variance the penalty corresponds to).
    pub ridge_lambda: Option<f64>,
    pub solver: SolverConfig,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            lambda_mode: LambdaMode::Cv,
            grid_size: 20,
            holdout_fraction: 0.2,
            patience: 3,
            ridge_lambda: None,
            solver: SolverConfig::default(),
        }
    }
}

impl TuneOptions {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.grid_size < 2 {
            return Err(Error::InvalidConfig("grid_size must be >= 2".into()));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return Err(Error::InvalidConfig("holdout_fraction must lie in (0, 1)".into()));
        }
        if let Some(r) = self.ridge_lambda {
            if !(r >= 0.0) {
                return Err(Error::InvalidConfig("ridge_lambda must be >= 0".into()));
            }
        }
        Ok(())
    }

    /// Relative grid positions, largest first.
    pub fn grid(&self) -> Vec<f64> {
        let g = self.grid_size;
        (0..g).map(|k| 10f64.powf(-3.0 * k as f64 / (g - 1) as f64)).collect()
    }
}

/// A fitted method and the weights that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOutcome {
    pub coefficients: CoefficientSet,
    /// Absolute weights of the final fit (`λ`, or `λ₁, λ₂` for dlr).
    pub lambdas: Vec<f64>,
    /// Relative grid positions selected in cross-validation mode.
    pub relative: Vec<f64>,
    pub converged: bool,
}

/// Mean over features of `Σ_ℓ ‖x_j^(ℓ)‖²`: converts a noise-variance level
/// into the scale of the diagonal and partial-full penalties.
pub fn penalty_scale(dataset: &MultiTaskDataset) -> f64 {
    let total: f64 = dataset.tasks().iter().map(|t| t.design.norm_squared()).sum();
    (total / dataset.dim() as f64).max(f64::MIN_POSITIVE)
}

/// Weights used by `LambdaMode::Fixed(v)`: `v` for the trace-penalized
/// estimator, `v × penalty_scale` for the other covariance estimators, and
/// `√(v m)` for the group Lasso methods.
pub fn fixed_weights(method: Method, dataset: &MultiTaskDataset, v: f64) -> Vec<f64> {
    let scale = penalty_scale(dataset);
    match method {
        Method::Scc | Method::Pfc => vec![v * scale],
        Method::Scct => vec![v],
        Method::Gl | Method::Glsls => vec![(v * dataset.n_tasks() as f64).sqrt()],
        Method::Dlr => vec![v * scale, v * scale],
    }
}

/// Mean squared prediction error over every row of every task.
pub fn prediction_mse(dataset: &MultiTaskDataset, coefficients: &CoefficientSet) -> f64 {
    let mut sse = 0.0;
    let mut rows = 0;
    for (t, b) in dataset.tasks().iter().zip(coefficients.betas()) {
        sse += (&t.response - &t.design * b).norm_squared();
        rows += t.n_samples();
    }
    if rows == 0 {
        0.0
    } else {
        sse / rows as f64
    }
}

trait PathModel {
    fn lambda_max(&self) -> f64;
    /// Fits at `lambda`, warm-started from the previous call.
    fn fit(&mut self, lambda: f64) -> Result<(CoefficientSet, bool)>;
}

struct SccPath<'a> {
    dataset: &'a MultiTaskDataset,
    quad: SccQuadratic,
    trace: bool,
    scale: f64,
    ridge: Option<f64>,
    omega: Option<DVector<f64>>,
    solver: &'a SolverConfig,
}

impl<'a> SccPath<'a> {
    fn new(dataset: &'a MultiTaskDataset, trace: bool, opts: &'a TuneOptions) -> Result<Self> {
        Ok(Self {
            dataset,
            quad: build_scc_quadratic(dataset)?,
            trace,
            scale: if trace { 1.0 } else { penalty_scale(dataset) },
            ridge: opts.ridge_lambda,
            omega: None,
            solver: &opts.solver,
        })
    }

    fn solve_omega(&mut self, lambda: f64) -> Result<(DiagonalCovariance, bool)> {
        let penalty = if self.trace { self.quad.trace_penalty(lambda) } else { self.quad.l1_penalty(lambda) };
        let (cov, trace) = self.quad.solve(&penalty, self.omega.as_ref(), self.solver)?;
        self.omega = Some(cov.omega().clone());
        Ok((cov, trace.converged))
    }
}

impl PathModel for SccPath<'_> {
    fn lambda_max(&self) -> f64 {
        if self.trace {
            self.quad.trace_zero_threshold()
        } else {
            self.quad.zero_threshold()
        }
    }

    fn fit(&mut self, lambda: f64) -> Result<(CoefficientSet, bool)> {
        let (cov, converged) = self.solve_omega(lambda)?;
        let ridge = self.ridge.unwrap_or(lambda / self.scale);
        let coefs = ridge_all_tasks(self.dataset, &CovarianceEstimate::Diagonal(cov), ridge)?;
        Ok((coefs, converged))
    }
}

struct GlPath<'a> {
    dataset: &'a MultiTaskDataset,
    refit: bool,
    betas: Option<Vec<DVector<f64>>>,
    solver: &'a SolverConfig,
}

impl PathModel for GlPath<'_> {
    fn lambda_max(&self) -> f64 {
        group_lasso_zero_threshold(self.dataset)
    }

    fn fit(&mut self, lambda: f64) -> Result<(CoefficientSet, bool)> {
        let res = group_lasso_solve(self.dataset, lambda, self.betas.as_deref(), self.solver)?;
        self.betas = Some(res.coefficients.betas().to_vec());
        let converged = res.trace.converged;
        if self.refit {
            Ok((least_squares_on_support(self.dataset, res.coefficients.support())?, converged))
        } else {
            Ok((res.coefficients, converged))
        }
    }
}

struct PfcPath<'a> {
    dataset: &'a MultiTaskDataset,
    moments: Moments,
    gamma: Vec<f64>,
    scale: f64,
    ridge: Option<f64>,
    omega: Option<DMatrix<f64>>,
    solver: &'a SolverConfig,
}

impl PathModel for PfcPath<'_> {
    fn lambda_max(&self) -> f64 {
        partial_full_zero_threshold(&self.moments, &self.gamma)
    }

    fn fit(&mut self, lambda: f64) -> Result<(CoefficientSet, bool)> {
        let (cov, trace) = solve_partial_full(&self.moments, lambda, &self.gamma, self.omega.as_ref(), self.solver)?;
        self.omega = Some(cov.matrix().clone());
        let ridge = self.ridge.unwrap_or(lambda / self.scale);
        let coefs = ridge_all_tasks(self.dataset, &CovarianceEstimate::Full(cov), ridge)?;
        Ok((coefs, trace.converged))
    }
}

/// Path over the trace-norm weight with the diagonal weight held fixed.
struct DlrPath<'a> {
    dataset: &'a MultiTaskDataset,
    quad: SccQuadratic,
    moments: Moments,
    lambda1: f64,
    scale: f64,
    ridge: Option<f64>,
    start: (DVector<f64>, DMatrix<f64>),
    solver: &'a SolverConfig,
}

impl<'a> DlrPath<'a> {
    fn new(dataset: &'a MultiTaskDataset, lambda1: f64, opts: &'a TuneOptions) -> Result<Self> {
        let quad = build_scc_quadratic(dataset)?;
        let (cov, _) = quad.solve(&quad.l1_penalty(lambda1), None, &opts.solver)?;
        let d = dataset.dim();
        Ok(Self {
            dataset,
            quad,
            moments: Moments::new(dataset),
            lambda1,
            scale: penalty_scale(dataset),
            ridge: opts.ridge_lambda,
            start: (cov.omega().clone(), DMatrix::zeros(d, d)),
            solver: &opts.solver,
        })
    }
}

impl PathModel for DlrPath<'_> {
    fn lambda_max(&self) -> f64 {
        lowrank_zero_threshold(&self.moments, &self.start.0).max(f64::MIN_POSITIVE)
    }

    fn fit(&mut self, lambda2: f64) -> Result<(CoefficientSet, bool)> {
        let (dec, trace) = solve_diag_lowrank(
            &self.quad,
            &self.moments,
            self.lambda1,
            lambda2,
            Some((&self.start.0, &self.start.1)),
            self.solver,
        )?;
        self.start = (dec.sparse_part.omega().clone(), dec.lowrank_part.matrix().clone());
        let ridge = self.ridge.unwrap_or(self.lambda1 / self.scale);
        let coefs = ridge_all_tasks(self.dataset, &CovarianceEstimate::DiagLowRank(dec), ridge)?;
        Ok((coefs, trace.converged))
    }
}

fn build_path<'a>(method: Method, dataset: &'a MultiTaskDataset, opts: &'a TuneOptions) -> Result<Box<dyn PathModel + 'a>> {
    Ok(match method {
        Method::Scc => Box::new(SccPath::new(dataset, false, opts)?),
        Method::Scct => Box::new(SccPath::new(dataset, true, opts)?),
        Method::Gl | Method::Glsls => Box::new(GlPath {
            dataset,
            refit: method == Method::Glsls,
            betas: None,
            solver: &opts.solver,
        }),
        Method::Pfc => Box::new(PfcPath {
            dataset,
            moments: Moments::new(dataset),
            gamma: opts.solver.gamma_for(dataset.dim())?,
            scale: penalty_scale(dataset),
            ridge: opts.ridge_lambda,
            omega: None,
            solver: &opts.solver,
        }),
        Method::Dlr => unreachable!("dlr paths are built with an explicit diagonal weight"),
    })
}

/// Walks the relative grid on `path`, scoring each fit on `validation`, and
/// returns the best relative position.
fn select_on_path(path: &mut dyn PathModel, validation: &MultiTaskDataset, opts: &TuneOptions) -> Result<f64> {
    let lmax = path.lambda_max();
    let grid = opts.grid();
    let mut best = (f64::INFINITY, grid[0], 0);
    for (i, &rel) in grid.iter().enumerate() {
        match path.fit(rel * lmax) {
            Ok((coefs, _)) => {
                let err = prediction_mse(validation, &coefs);
                if err < best.0 {
                    best = (err, rel, i);
                }
            }
            // Too many features selected for the held-out fit: larger λ only.
            Err(Error::RankDeficient(_)) => {}
            Err(e) => return Err(e),
        }
        if i - best.2 >= opts.patience {
            break;
        }
    }
    Ok(best.1)
}

/// Chooses the weights of `method` on `train` and fits it.
pub fn fit_method(method: Method, train: &MultiTaskDataset, opts: &TuneOptions) -> Result<FitOutcome> {
    opts.validate()?;
    train.ensure_valid()?;
    match opts.lambda_mode {
        LambdaMode::Fixed(v) => {
            let w = fixed_weights(method, train, v);
            let (coefficients, converged) = if method == Method::Dlr {
                DlrPath::new(train, w[0], opts)?.fit(w[1])?
            } else {
                build_path(method, train, opts)?.fit(w[0])?
            };
            Ok(FitOutcome { coefficients, lambdas: w, relative: Vec::new(), converged })
        }
        LambdaMode::Cv => {
            let (fit_part, validation) = train.split_rows(1.0 - opts.holdout_fraction);
            if method == Method::Dlr {
                let rel1 = select_on_path(&mut *build_path(Method::Scc, &fit_part, opts)?, &validation, opts)?;
                let l1_fit = rel1 * build_scc_quadratic(&fit_part)?.zero_threshold();
                let rel2 = select_on_path(&mut DlrPath::new(&fit_part, l1_fit, opts)?, &validation, opts)?;
                let l1 = rel1 * build_scc_quadratic(train)?.zero_threshold();
                let mut full = DlrPath::new(train, l1, opts)?;
                let l2 = rel2 * full.lambda_max();
                let (coefficients, converged) = full.fit(l2)?;
                return Ok(FitOutcome { coefficients, lambdas: vec![l1, l2], relative: vec![rel1, rel2], converged });
            }
            let rel = select_on_path(&mut *build_path(method, &fit_part, opts)?, &validation, opts)?;
            let mut full = build_path(method, train, opts)?;
            let lambda = rel * full.lambda_max();
            let (coefficients, converged) = full.fit(lambda)?;
            Ok(FitOutcome { coefficients, lambdas: vec![lambda], relative: vec![rel], converged })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::synthetic::{generate_synthetic, SyntheticConfig};

    #[test]
    fn parsing() {
        assert_eq!(parse_methods("scc,gl, glsls").unwrap(), vec![Method::Scc, Method::Gl, Method::Glsls]);
        assert!(parse_methods("scc,msmtfl").is_err());
        assert_eq!("cv".parse::<LambdaMode>().unwrap(), LambdaMode::Cv);
        assert_eq!("fixed:0.25".parse::<LambdaMode>().unwrap(), LambdaMode::Fixed(0.25));
        assert!("fixed:-1".parse::<LambdaMode>().is_err());
        assert!("auto".parse::<LambdaMode>().is_err());
    }

    #[test]
    fn grid_spans_three_decades() {
        let g = TuneOptions::default().grid();
        assert_eq!(g.len(), 20);
        assert_eq!(g[0], 1.0);
        assert!((g[19] - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn every_method_fits_a_small_problem() {
        let cfg = SyntheticConfig { m: 6, d: 12, n: 20, k: 3, seed: 2, ..Default::default() };
        let (ds, _) = generate_synthetic(&cfg).unwrap();
        let opts = TuneOptions { ridge_lambda: Some(0.1), ..Default::default() };
        for method in Method::ALL {
            let out = fit_method(method, &ds, &opts).unwrap();
            assert_eq!(out.coefficients.n_tasks(), 6, "{method}");
            assert!(prediction_mse(&ds, &out.coefficients) < prediction_mse(&ds, &CoefficientSet::zeros(6, 12)));
        }
    }

    #[test]
    fn fixed_mode_on_identity_designs_matches_the_closed_forms() {
        use crate::oracles::{group_lasso_closed_form, two_step_beta_closed_form, NormalMeansInstance};
        let y = DMatrix::from_row_slice(3, 2, &[1.0, 0.2, -2.0, 0.1, 1.5, -0.3]);
        let inst = NormalMeansInstance::new(y, 0.25, 0.25).unwrap();
        let ds = inst.to_dataset();
        let opts = TuneOptions { lambda_mode: LambdaMode::Fixed(0.25), ..Default::default() };
        let scc = fit_method(Method::Scc, &ds, &opts).unwrap();
        assert!((scc.coefficients.to_matrix() - two_step_beta_closed_form(&inst)).amax() < 1e-8);
        let gl = fit_method(Method::Gl, &ds, &opts).unwrap();
        assert!((gl.coefficients.to_matrix() - group_lasso_closed_form(&inst).1).amax() < 1e-6);
    }
}
