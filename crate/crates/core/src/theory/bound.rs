//! Monte-Carlo check of the prediction-error sandwich for the ridge step.
//!
//! For a fixed design `X` with `Σ = XᵀX`, a prior `Ω̂` independent of `y`, and
//! `β̄ ~ N(0, Ω̄)`, `ε ~ N(0, σ²I)`, the excess error of `β̂ = (Σ + λΩ̂⁻¹)⁻¹Xᵀy`
//! over the best achievable error satisfies
//!
//! `σ²λ ω ≤ E‖Xβ̂ − Xβ̄‖² − σ² T ≤ λ² ω + (λ − σ²) T`
//!
//! where `T = ‖XΩ̄^{1/2}(Ω̄^{1/2}ΣΩ̄^{1/2} + λI)^{−1/2}‖_F²` and
//! `ω = ‖X(Ω̂Σ + λI)⁻¹(Ω̂ − Ω̄)Σ^{1/2}(Σ^{1/2}Ω̄Σ^{1/2} + λI)^{−1/2}‖_F²`.
//! `σ² T` is the error of the ridge step run with `Ω̂ = Ω̄`, which is the
//! minimum when `λ = σ²`; at that point both bounds reduce to `σ²λ ω = λ² ω`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::CovarianceEstimate;

const CHUNK: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub mismatch_omega: f64,
    pub lower: f64,
    pub upper: f64,
    /// `σ² T`, the expected error when `Ω̂ = Ω̄`.
    pub optimal_term: f64,
    /// `T` itself.
    pub optimal_norm: f64,
    pub mc_error_estimate: f64,
    pub mc_stderr: f64,
    pub mc_trials: usize,
    /// `mc_error_estimate − optimal_term`.
    pub excess: f64,
    pub sandwich_holds: bool,
    /// `σ² T + λ⁻¹‖Σ(Ω̂ − Ω̄)‖_F²`.
    pub simplified_upper: f64,
    pub simplified_holds: bool,
    pub note: Option<String>,
}

/// The deterministic parts of the bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    pub mismatch_omega: f64,
    pub optimal_norm: f64,
    pub simplified_gap: f64,
}

pub fn bound_terms(
    design: &DMatrix<f64>,
    omega_hat: &DMatrix<f64>,
    omega_bar: &DMatrix<f64>,
    lambda: f64,
) -> Result<BoundTerms> {
    let d = design.ncols();
    check_square(omega_hat, d, "omega_hat")?;
    check_square(omega_bar, d, "omega_bar")?;
    let sigma = linalg::gram(design);
    let identity = DMatrix::<f64>::identity(d, d);
    let sigma_half = linalg::psd_sqrt(&sigma);
    let inner = linalg::spd_inv_sqrt(&(&sigma_half * omega_bar * &sigma_half + &identity * lambda));
    let left = (omega_hat * &sigma + &identity * lambda)
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Internal("Ω̂Σ + λI is singular".into()))?;
    let mismatch = design * left * (omega_hat - omega_bar) * &sigma_half * inner;

    let bar_half = linalg::psd_sqrt(omega_bar);
    let opt = design * &bar_half * linalg::spd_inv_sqrt(&(&bar_half * &sigma * &bar_half + &identity * lambda));

    Ok(BoundTerms {
        mismatch_omega: linalg::frobenius_sq(&mismatch),
        optimal_norm: linalg::frobenius_sq(&opt),
        simplified_gap: linalg::frobenius_sq(&(&sigma * (omega_hat - omega_bar))) / lambda,
    })
}

fn check_square(m: &DMatrix<f64>, d: usize, name: &str) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "{name} is {}x{}, design has d = {d}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Mean and standard error of `‖Xβ̂ − Xβ̄‖²` over `trials` simulated draws.
pub fn simulate_prediction_error(
    design: &DMatrix<f64>,
    omega_hat: &DMatrix<f64>,
    omega_bar: &DMatrix<f64>,
    lambda: f64,
    sigma2: f64,
    trials: usize,
    seed: u64,
) -> (f64, f64) {
    let n = design.nrows();
    let r = linalg::psd_range_factor(omega_hat);
    // β̂ = M y with M = R (RᵀΣR + λI)⁻¹ RᵀXᵀ
    let xr = design * &r;
    let mut lhs = xr.tr_mul(&xr);
    for i in 0..lhs.nrows() {
        lhs[(i, i)] += lambda;
    }
    let solve = match lhs.clone().cholesky() {
        Some(c) => c.solve(&xr.transpose()),
        None => DMatrix::zeros(r.ncols(), n),
    };
    let fit = &xr * solve; // X M, n × n
    let bar_half = linalg::psd_sqrt(omega_bar);
    let signal = design * &bar_half;
    let p = &fit * &signal - &signal;
    let q = fit * sigma2.sqrt();
    let d = design.ncols();

    let chunks = trials.div_ceil(CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(trials - c * CHUNK);
            let mut z = DVector::zeros(d);
            let mut e = DVector::zeros(n);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                e.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                let err = (&p * &z + &q * &e).norm_squared();
                s1 += err;
                s2 += err * err;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |acc, s| (acc.0 + s.0, acc.1 + s.1));
    let t = trials as f64;
    let mean = s1 / t;
    let var = if trials > 1 { ((s2 - t * mean * mean) / (t - 1.0)).max(0.0) } else { 0.0 };
    (mean, (var / t).sqrt())
}

pub fn thm41_bound_report(
    design: &DMatrix<f64>,
    omega_hat: &CovarianceEstimate,
    omega_bar: &CovarianceEstimate,
    lambda: f64,
    sigma2: f64,
    mc_trials: usize,
    seed: u64,
) -> Result<BoundReport> {
    if !(sigma2 > 0.0) || !(lambda >= sigma2) {
        return Err(Error::InvalidConfig(format!(
            "the bound needs sigma2 > 0 and lambda >= sigma2, got lambda = {lambda}, sigma2 = {sigma2}"
        )));
    }
    if mc_trials < 2 {
        return Err(Error::InvalidConfig("mc_trials must be at least 2".into()));
    }
    let hat = omega_hat.as_matrix();
    let bar = omega_bar.as_matrix();
    let terms = bound_terms(design, &hat, &bar, lambda)?;
    let (mean, se) = simulate_prediction_error(design, &hat, &bar, lambda, sigma2, mc_trials, seed);
    let optimal_term = sigma2 * terms.optimal_norm;
    let lower = sigma2 * lambda * terms.mismatch_omega;
    let upper = lambda * lambda * terms.mismatch_omega + (lambda - sigma2) * terms.optimal_norm;
    let excess = mean - optimal_term;
    let sandwich_holds = excess >= lower - 3.0 * se && excess <= upper + 3.0 * se;
    let simplified_upper = optimal_term + terms.simplified_gap;
    let simplified_holds = mean <= simplified_upper + 3.0 * se;
    let note = (!sandwich_holds).then(|| {
        format!(
            "excess {excess:.6} outside [{:.6}, {:.6}] (3 stderr); rerun with more trials or another seed \
             to separate Monte-Carlo noise from a defect",
            lower - 3.0 * se,
            upper + 3.0 * se
        )
    });
    Ok(BoundReport {
        mismatch_omega: terms.mismatch_omega,
        lower,
        upper,
        optimal_term,
        optimal_norm: terms.optimal_norm,
        mc_error_estimate: mean,
        mc_stderr: se,
        mc_trials,
        excess,
        sandwich_holds,
        simplified_upper,
        simplified_holds,
        note,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DiagonalCovariance;

    fn diag(v: &[f64]) -> CovarianceEstimate {
        CovarianceEstimate::Diagonal(DiagonalCovariance::new(DVector::from_row_slice(v)).unwrap())
    }

    #[test]
    fn exact_prior_has_no_mismatch() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.3, 0.2, 1.0, 0.5, -0.4]);
        let om = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let t = bound_terms(&x, &om, &om, 0.5).unwrap();
        assert_eq!(t.mismatch_omega, 0.0);
        assert_eq!(t.simplified_gap, 0.0);
    }

    #[test]
    fn zero_signal_zero_prior_has_zero_error() {
        let x = DMatrix::identity(3, 3);
        let r = thm41_bound_report(&x, &diag(&[0.0; 3]), &diag(&[0.0; 3]), 0.5, 0.5, 1000, 3).unwrap();
        assert_eq!(r.optimal_term, 0.0);
        assert_eq!(r.mc_error_estimate, 0.0);
        assert!(r.sandwich_holds);
    }

    #[test]
    fn mismatch_matches_coordinatewise_formula() {
        // identity design: ω = Σ_j (ω̂_j − ω̄_j)² / ((ω̂_j + λ)² (ω̄_j + λ))
        let (hat, bar, lam) = ([1.2, 0.8, 0.1], [1.0, 1.0, 0.0], 0.25);
        let t = bound_terms(
            &DMatrix::identity(3, 3),
            &DMatrix::from_diagonal(&DVector::from_row_slice(&hat)),
            &DMatrix::from_diagonal(&DVector::from_row_slice(&bar)),
            lam,
        )
        .unwrap();
        let expected: f64 = (0..3)
            .map(|j| (hat[j] - bar[j]).powi(2) / ((hat[j] + lam).powi(2) * (bar[j] + lam)))
            .sum();
        assert!((t.mismatch_omega - expected).abs() < 1e-12);
    }

    #[test]
    fn lambda_below_noise_is_rejected() {
        let x = DMatrix::identity(2, 2);
        assert!(thm41_bound_report(&x, &diag(&[1.0, 1.0]), &diag(&[1.0, 1.0]), 0.1, 0.2, 100, 0).is_err());
    }
}
