//! Closed-form solutions for identity designs (`X^(ℓ) = I`, `n_ℓ = d`).
//!
//! With `t_j = m⁻¹ Σ_ℓ (y_j^(ℓ))²`:
//! - diagonal covariance coding: `ω_j = max(0, t_j − λ)`
//! - two-step coefficients: `β_j = y_j max(0, 1 − λ/t_j)`
//! - group Lasso: `ω_j = max(0, √(λ t_j) − λ)`, `β_j = y_j max(0, 1 − √λ/√t_j)`
//!
//! The covariance-coding formula corresponds to the solver run with penalty
//! `λ m` (see [`scc_solver_lambda`]) and the group Lasso formula to
//! `λ_gl = √(λ m)` (see [`group_lasso_solver_lambda`]).

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::covariance::fit_scc_diagonal;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{CovarianceStructure, MultiTaskDataset, SolverConfig, TaskData};
use crate::regression::{group_lasso_fit, two_step_fit, RidgeSolveOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct NormalMeansInstance {
    /// `m × d`, one task per row.
    pub responses: DMatrix<f64>,
    pub sigma2: f64,
    pub lambda: f64,
}

impl NormalMeansInstance {
    pub fn new(responses: DMatrix<f64>, sigma2: f64, lambda: f64) -> Result<Self> {
        if responses.nrows() == 0 {
            return Err(Error::InvalidConfig("normal-means instance needs m >= 1".into()));
        }
        if !linalg::all_finite(responses.iter()) {
            return Err(Error::InvalidConfig("normal-means responses must be finite".into()));
        }
        if !(lambda >= 0.0) || !(sigma2 >= 0.0) {
            return Err(Error::InvalidConfig("lambda and sigma2 must be >= 0".into()));
        }
        Ok(Self { responses, sigma2, lambda })
    }

    pub fn m(&self) -> usize {
        self.responses.nrows()
    }

    pub fn d(&self) -> usize {
        self.responses.ncols()
    }

    /// `m⁻¹ Σ_ℓ (y_j^(ℓ))²` per coordinate.
    pub fn mean_squares(&self) -> DVector<f64> {
        let m = self.m() as f64;
        DVector::from_iterator(self.d(), self.responses.column_iter().map(|c| c.norm_squared() / m))
    }

    /// The instance as a dataset with `X^(ℓ) = I_d`.
    pub fn to_dataset(&self) -> MultiTaskDataset {
        let d = self.d();
        let tasks = self
            .responses
            .row_iter()
            .map(|r| TaskData::new(DMatrix::identity(d, d), r.transpose()))
            .collect();
        MultiTaskDataset::new_unchecked(tasks, d)
    }
}

/// Penalty to pass to the diagonal covariance-coding solver so that it
/// reproduces [`scc_omega_closed_form`].
pub fn scc_solver_lambda(instance: &NormalMeansInstance) -> f64 {
    instance.lambda * instance.m() as f64
}

/// Group Lasso weight reproducing [`group_lasso_closed_form`].
pub fn group_lasso_solver_lambda(instance: &NormalMeansInstance) -> f64 {
    (instance.lambda * instance.m() as f64).sqrt()
}

pub fn scc_omega_closed_form(instance: &NormalMeansInstance) -> DVector<f64> {
    instance.mean_squares().map(|t| (t - instance.lambda).max(0.0))
}

fn shrink_rows(instance: &NormalMeansInstance, factor: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let t = instance.mean_squares();
    let mut out = instance.responses.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= factor(t[j]);
    }
    out
}

/// `m × d` coefficients of the two-step procedure.
pub fn two_step_beta_closed_form(instance: &NormalMeansInstance) -> DMatrix<f64> {
    let lambda = instance.lambda;
    shrink_rows(instance, |t| if t > 0.0 { (1.0 - lambda / t).max(0.0) } else { 0.0 })
}

/// Implied variances and `m × d` coefficients of the group Lasso.
pub fn group_lasso_closed_form(instance: &NormalMeansInstance) -> (DVector<f64>, DMatrix<f64>) {
    let lambda = instance.lambda;
    let omega = instance.mean_squares().map(|t| ((lambda * t).sqrt() - lambda).max(0.0));
    let beta = shrink_rows(instance, |t| if t > 0.0 { (1.0 - (lambda / t).sqrt()).max(0.0) } else { 0.0 });
    (omega, beta)
}

/// Random instance with `ω̄_j` either 0 or in `[0.5, 2]`, `λ = σ² ∈ [0.1, 0.5]`,
/// `m ≤ max_m`, `d ≤ max_d`.
pub fn random_instance(rng: &mut ChaCha8Rng, max_m: usize, max_d: usize) -> NormalMeansInstance {
    let m = rng.random_range(1..=max_m);
    let d = rng.random_range(1..=max_d);
    let sigma2: f64 = rng.random_range(0.1..0.5);
    let omega: Vec<f64> = (0..d)
        .map(|_| if rng.random_bool(0.5) { rng.random_range(0.5..2.0) } else { 0.0 })
        .collect();
    let responses = DMatrix::from_fn(m, d, |_, j| {
        omega[j].sqrt() * rng.sample::<f64, _>(StandardNormal) + sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal)
    });
    NormalMeansInstance { responses, sigma2, lambda: sigma2 }
}

/// Outcome of one solver-versus-closed-form comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCheck {
    pub name: String,
    pub cases: usize,
    pub max_abs_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl OracleCheck {
    fn new(name: &str, cases: usize, max_abs_error: f64, tolerance: f64) -> Self {
        Self { name: name.into(), cases, max_abs_error, tolerance, passed: max_abs_error <= tolerance }
    }
}

/// Compares the solvers against the closed forms on `instances` random
/// identity-design problems, and checks the group Lasso under-estimation
/// inequality on 1,000 random `(t, λ)` pairs.
pub fn run_oracle_checks(instances: usize, seed: u64) -> Result<Vec<OracleCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let exact = SolverConfig::default().with_rel_tol(1e-14);
    let (mut scc_err, mut gl_omega_err, mut gl_beta_err, mut two_err) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..instances {
        let inst = random_instance(&mut rng, 20, 10);
        let ds = inst.to_dataset();

        let (omega, _) = fit_scc_diagonal(&ds, &exact.clone().with_lambda(scc_solver_lambda(&inst)))?;
        scc_err = scc_err.max((omega.omega() - scc_omega_closed_form(&inst)).amax());

        let gl = group_lasso_fit(&ds, group_lasso_solver_lambda(&inst), &exact)?;
        let (w, b) = group_lasso_closed_form(&inst);
        gl_omega_err = gl_omega_err.max((&gl.implied_omega - w).amax());
        gl_beta_err = gl_beta_err.max((gl.coefficients.to_matrix() - b).amax());

        let two = two_step_fit(
            &ds,
            &exact.clone().with_lambda(scc_solver_lambda(&inst)),
            CovarianceStructure::Diagonal,
            &RidgeSolveOptions::new(inst.lambda),
        )?;
        two_err = two_err.max((two.coefficients.to_matrix() - two_step_beta_closed_form(&inst)).amax());
    }
    let mut gap = 0.0_f64;
    for _ in 0..1000 {
        let lambda: f64 = rng.random_range(0.0..2.0);
        let t = lambda + rng.random_range(0.0..5.0);
        let inst = NormalMeansInstance::new(DMatrix::from_element(1, 1, t.sqrt()), lambda, lambda)?;
        let gl = group_lasso_closed_form(&inst).0[0];
        let scc = scc_omega_closed_form(&inst)[0];
        gap = gap.max(gl - scc);
    }
    Ok(vec![
        OracleCheck::new("scc omega vs closed form", instances, scc_err, 1e-8),
        OracleCheck::new("group lasso omega vs closed form", instances, gl_omega_err, 1e-6),
        OracleCheck::new("group lasso beta vs closed form", instances, gl_beta_err, 1e-6),
        OracleCheck::new("two-step beta vs closed form", instances, two_err, 1e-8),
        OracleCheck::new("group lasso omega <= scc omega", 1000, gap.max(0.0), 0.0),
    ])
}
