//! Multi-task group Lasso
//! `Σ_ℓ ½ ‖y^(ℓ) − X^(ℓ)β^(ℓ)‖² + λ Σ_j ‖(β_j^(ℓ))_ℓ‖₂`
//! by block coordinate descent over feature rows.

use nalgebra::DVector;

use crate::covariance::SolveTrace;
use crate::error::{Error, Result};
use crate::model::{CoefficientSet, MultiTaskDataset, SolverConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct GroupLassoResult {
    pub coefficients: CoefficientSet,
    /// Variances from the inner minimization of the variational form:
    /// `ω_j = λ ‖β_j‖ / m`.
    pub implied_omega: DVector<f64>,
    pub trace: SolveTrace,
}

/// Smallest `λ` with the all-zero solution: `max_j ‖(x_jᵀy^(ℓ))_ℓ‖`.
pub fn group_lasso_zero_threshold(dataset: &MultiTaskDataset) -> f64 {
    let corr: Vec<DVector<f64>> = dataset.tasks().iter().map(|t| t.design.tr_mul(&t.response)).collect();
    (0..dataset.dim())
        .map(|j| corr.iter().map(|c| c[j] * c[j]).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

/// Minimizes `Σ_ℓ (½ a_ℓ v_ℓ² − c_ℓ v_ℓ) + λ ‖v‖` over `v`.
///
/// The nonzero solution is `v_ℓ = c_ℓ ρ / (a_ℓ ρ + λ)` where `ρ = ‖v‖` solves
/// `Σ c_ℓ² / (a_ℓ ρ + λ)² = 1`, found by bisection.
pub(crate) fn row_update(a: &[f64], c: &[f64], lambda: f64, out: &mut [f64]) {
    let c_norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    if c_norm <= lambda {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    if lambda == 0.0 {
        for ((o, &al), &cl) in out.iter_mut().zip(a).zip(c) {
            *o = if al > 0.0 { cl / al } else { 0.0 };
        }
        return;
    }
    let active = a.iter().zip(c).filter(|(&al, &cl)| al > 0.0 || cl != 0.0);
    let (mut a_min, mut a_max) = (f64::INFINITY, 0.0_f64);
    for (&al, _) in active {
        a_min = a_min.min(al);
        a_max = a_max.max(al);
    }
    if a_min == a_max {
        let scale = (1.0 - lambda / c_norm) / a_min;
        for (o, &cl) in out.iter_mut().zip(c) {
            *o = cl * scale;
        }
        return;
    }
    let phi = |rho: f64| {
        a.iter()
            .zip(c)
            .map(|(&al, &cl)| {
                let den = al * rho + lambda;
                cl * cl / (den * den)
            })
            .sum::<f64>()
            - 1.0
    };
    let (mut lo, mut hi) = (0.0, c_norm / a_min);
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rho = 0.5 * (lo + hi);
    for ((o, &al), &cl) in out.iter_mut().zip(a).zip(c) {
        *o = cl * rho / (al * rho + lambda);
    }
}

fn row_objective(a: &[f64], c: &[f64], v: &[f64], lambda: f64) -> f64 {
    let mut s = 0.0;
    let mut nrm = 0.0;
    for i in 0..v.len() {
        s += 0.5 * a[i] * v[i] * v[i] - c[i] * v[i];
        nrm += v[i] * v[i];
    }
    s + lambda * nrm.sqrt()
}

pub fn group_lasso_fit(
    dataset: &MultiTaskDataset,
    lambda_gl: f64,
    config: &SolverConfig,
) -> Result<GroupLassoResult> {
    group_lasso_solve(dataset, lambda_gl, None, config)
}

/// Group Lasso from an optional warm start (one coefficient vector per task).
pub(crate) fn group_lasso_solve(
    dataset: &MultiTaskDataset,
    lambda_gl: f64,
    start: Option<&[DVector<f64>]>,
    config: &SolverConfig,
) -> Result<GroupLassoResult> {
    config.validate()?;
    dataset.ensure_valid()?;
    if !(lambda_gl >= 0.0) {
        return Err(Error::InvalidConfig(format!("lambda_gl must be >= 0, got {lambda_gl}")));
    }
    let m = dataset.n_tasks();
    let d = dataset.dim();
    let tasks = dataset.tasks();
    let mut betas: Vec<DVector<f64>> = match start {
        Some(s) if s.len() == m && s.iter().all(|b| b.len() == d) => s.to_vec(),
        Some(_) => return Err(Error::DimensionMismatch("warm start has wrong shape".into())),
        None => vec![DVector::zeros(d); m],
    };
    let mut residuals: Vec<DVector<f64>> =
        tasks.iter().zip(&betas).map(|(t, b)| &t.response - &t.design * b).collect();
    // col_sq[j][ℓ] = ‖x_j^(ℓ)‖²
    let col_sq: Vec<Vec<f64>> = (0..d)
        .map(|j| tasks.iter().map(|t| t.design.column(j).norm_squared()).collect())
        .collect();

    let objective = |betas: &[DVector<f64>], residuals: &[DVector<f64>]| {
        let fit: f64 = residuals.iter().map(|r| 0.5 * r.norm_squared()).sum();
        let pen: f64 = (0..d)
            .map(|j| betas.iter().map(|b| b[j] * b[j]).sum::<f64>().sqrt())
            .sum();
        fit + lambda_gl * pen
    };

    let mut a = vec![0.0; m];
    let mut c = vec![0.0; m];
    let mut v = vec![0.0; m];
    let mut old = vec![0.0; m];
    let mut sweep = |rows: &[usize], betas: &mut Vec<DVector<f64>>, residuals: &mut Vec<DVector<f64>>| {
        for &j in rows {
            for l in 0..m {
                a[l] = col_sq[j][l];
                old[l] = betas[l][j];
                c[l] = tasks[l].design.column(j).dot(&residuals[l]) + a[l] * old[l];
            }
            row_update(&a, &c, lambda_gl, &mut v);
            if row_objective(&a, &c, &v, lambda_gl) > row_objective(&a, &c, &old, lambda_gl) {
                continue;
            }
            for l in 0..m {
                let delta = v[l] - old[l];
                if delta != 0.0 {
                    betas[l][j] = v[l];
                    residuals[l].axpy(-delta, &tasks[l].design.column(j), 1.0);
                }
            }
        }
    };

    let all_rows: Vec<usize> = (0..d).collect();
    let mut values = vec![objective(&betas, &residuals)];
    let mut iterations = 0;
    let mut converged = false;
    // Alternate full sweeps with inner sweeps over the current active rows.
    'outer: while iterations < config.max_iter {
        iterations += 1;
        sweep(&all_rows, &mut betas, &mut residuals);
        let f = objective(&betas, &residuals);
        let prev = *values.last().unwrap();
        values.push(f.min(prev));
        if prev - f <= config.rel_tol * prev.abs() {
            converged = true;
            break;
        }
        let active: Vec<usize> = (0..d).filter(|&j| betas.iter().any(|b| b[j] != 0.0)).collect();
        loop {
            if iterations >= config.max_iter {
                break 'outer;
            }
            iterations += 1;
            sweep(&active, &mut betas, &mut residuals);
            let f = objective(&betas, &residuals);
            let prev = *values.last().unwrap();
            values.push(f.min(prev));
            if prev - f <= config.rel_tol * prev.abs() {
                break;
            }
        }
    }

    let row_norms: Vec<f64> = (0..d)
        .map(|j| betas.iter().map(|b| b[j] * b[j]).sum::<f64>().sqrt())
        .collect();
    let implied_omega = DVector::from_iterator(d, row_norms.iter().map(|n| lambda_gl * n / m as f64));
    let coefficients = CoefficientSet::new(betas, d)?;
    let active = coefficients.support().len();
    Ok(GroupLassoResult {
        coefficients,
        implied_omega,
        trace: SolveTrace { objective_values: values, iterations, converged, active_set_size: active },
    })
}

/// The group Lasso objective at `coefficients`.
pub fn group_lasso_objective(dataset: &MultiTaskDataset, coefficients: &CoefficientSet, lambda_gl: f64) -> f64 {
    let fit: f64 = dataset
        .tasks()
        .iter()
        .zip(coefficients.betas())
        .map(|(t, b)| 0.5 * (&t.response - &t.design * b).norm_squared())
        .sum();
    fit + lambda_gl * coefficients.row_norms().iter().sum::<f64>()
}

/// Largest violation of the group Lasso optimality conditions.
///
/// Nonzero rows need `X_jᵀ r = λ β_j / ‖β_j‖`; zero rows need `‖X_jᵀ r‖ ≤ λ`.
pub fn group_lasso_kkt_violation(dataset: &MultiTaskDataset, coefficients: &CoefficientSet, lambda_gl: f64) -> f64 {
    let residuals: Vec<DVector<f64>> = dataset
        .tasks()
        .iter()
        .zip(coefficients.betas())
        .map(|(t, b)| &t.response - &t.design * b)
        .collect();
    let mut worst = 0.0_f64;
    for j in 0..dataset.dim() {
        let corr: Vec<f64> = dataset
            .tasks()
            .iter()
            .zip(&residuals)
            .map(|(t, r)| t.design.column(j).dot(r))
            .collect();
        let row: Vec<f64> = coefficients.betas().iter().map(|b| b[j]).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (g, b) in corr.iter().zip(&row) {
                worst = worst.max((g - lambda_gl * b / norm).abs());
            }
        } else {
            let g = corr.iter().map(|v| v * v).sum::<f64>().sqrt();
            worst = worst.max(g - lambda_gl);
        }
    }
    worst
}

/// `F(β, ω)` of the variational form with `σ = λ / √m`, scaled by `σ²`:
/// `Σ ½‖r‖² + σ² Σ_j ‖β_j‖² / (2ω_j) + (m/2) Σ_j ω_j`. Rows with `ω_j = 0`
/// must be zero and contribute nothing.
pub fn variational_objective(
    dataset: &MultiTaskDataset,
    coefficients: &CoefficientSet,
    omega: &DVector<f64>,
    lambda_gl: f64,
) -> f64 {
    let m = dataset.n_tasks() as f64;
    let sigma2 = lambda_gl * lambda_gl / m;
    let fit: f64 = dataset
        .tasks()
        .iter()
        .zip(coefficients.betas())
        .map(|(t, b)| 0.5 * (&t.response - &t.design * b).norm_squared())
        .sum();
    let norms = coefficients.row_norms();
    let mut reg = 0.0;
    for j in 0..omega.len() {
        if omega[j] > 0.0 {
            reg += sigma2 * norms[j] * norms[j] / (2.0 * omega[j]);
        } else if norms[j] > 0.0 {
            return f64::INFINITY;
        }
        reg += 0.5 * m * omega[j];
    }
    fit + reg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TaskData;
    use nalgebra::DMatrix;

    #[test]
    fn row_update_solves_the_stationarity_equation() {
        let a = [1.0, 3.0, 0.5];
        let c = [2.0, -1.0, 4.0];
        let lambda = 1.5;
        let mut v = [0.0; 3];
        row_update(&a, &c, lambda, &mut v);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for i in 0..3 {
            // a v − c + λ v/‖v‖ = 0
            assert!((a[i] * v[i] - c[i] + lambda * v[i] / norm).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_lambda_is_least_squares() {
        let x1 = DMatrix::from_row_slice(4, 2, &[1.0, 0.2, 0.5, 1.0, -0.3, 0.4, 0.8, -1.0]);
        let x2 = DMatrix::from_row_slice(4, 2, &[0.3, 1.0, 1.0, 0.1, 0.2, -0.6, -1.0, 0.5]);
        let b1 = DVector::from_vec(vec![1.0, -2.0]);
        let b2 = DVector::from_vec(vec![0.5, 0.25]);
        let ds = MultiTaskDataset::new(vec![
            TaskData::new(x1.clone(), &x1 * &b1),
            TaskData::new(x2.clone(), &x2 * &b2),
        ])
        .unwrap();
        let cfg = SolverConfig::default().with_rel_tol(1e-15).with_max_iter(100_000);
        let res = group_lasso_fit(&ds, 0.0, &cfg).unwrap();
        assert!((&res.coefficients.betas()[0] - b1).amax() < 1e-6);
        assert!((&res.coefficients.betas()[1] - b2).amax() < 1e-6);
    }

    #[test]
    fn zero_threshold_found_by_bisection() {
        let x = DMatrix::from_row_slice(
            5,
            4,
            &[
                1.0, 0.3, -0.2, 0.0, 0.5, 1.0, 0.1, 0.7, -0.4, 0.2, 1.0, 0.3, 0.0, -0.6, 0.4, 1.0, 0.9,
                0.1, 0.0, -0.5,
            ],
        );
        let ds = MultiTaskDataset::new(vec![
            TaskData::new(x.clone(), DVector::from_vec(vec![1.0, -0.5, 2.0, 0.3, 0.0])),
            TaskData::new(x, DVector::from_vec(vec![-1.0, 0.4, 0.1, 1.2, 0.8])),
        ])
        .unwrap();
        let cfg = SolverConfig::default();
        let is_zero = |lam: f64| group_lasso_fit(&ds, lam, &cfg).unwrap().coefficients.support().is_empty();
        let (mut lo, mut hi) = (0.0, 100.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if is_zero(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let analytic = group_lasso_zero_threshold(&ds);
        assert!((hi - analytic).abs() < 1e-9 * analytic, "{hi} vs {analytic}");
    }
}
