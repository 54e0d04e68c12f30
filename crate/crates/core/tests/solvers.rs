use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use sccmtl_core::experiments::{generate_synthetic, SyntheticConfig};
use sccmtl_core::oracles::{two_step_beta_closed_form, NormalMeansInstance};
use sccmtl_core::{
    fit_diag_lowrank, fit_loo, fit_partial_full, fit_scc_diagonal, two_step_fit, CovarianceEstimate,
    CovarianceStructure, MultiTaskDataset, RidgeSolveOptions, SolverConfig, TaskData,
};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn identity_tasks(root: &DMatrix<f64>, m: usize, noise: f64, seed: u64) -> MultiTaskDataset {
    let d = root.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tasks = (0..m)
        .map(|_| {
            let z = DVector::from_fn(d, |_, _| normal(&mut rng));
            let e = DVector::from_fn(d, |_, _| noise * normal(&mut rng));
            TaskData::new(DMatrix::identity(d, d), root * z + e)
        })
        .collect();
    MultiTaskDataset::new(tasks).unwrap()
}

#[test]
fn partial_full_selects_the_planted_rows() {
    let d = 6;
    let mut root = DMatrix::zeros(d, d);
    root[(1, 1)] = 1.0;
    root[(2, 2)] = 1.0;
    root[(2, 1)] = 0.5;
    let ds = identity_tasks(&root, 200, 0.1, 4);
    let cfg = SolverConfig::default().with_lambda(0.5 * 200.0);
    let (cov, trace) = fit_partial_full(&ds, &cfg).unwrap();
    assert!(trace.converged);
    for k in [0, 3, 4, 5] {
        assert!(cov.matrix().row(k).norm() < 1e-3, "row {k}: {}", cov.matrix().row(k).norm());
    }
    assert!(cov.matrix().row(1).norm() > 0.1 && cov.matrix().row(2).norm() > 0.1);
}

#[test]
fn diag_lowrank_recovers_a_planted_rank_one_part() {
    let d = 8;
    let m = 400;
    let diag = [1.5, 0.0, 1.0, 0.0, 0.0, 2.0, 0.0, 0.0];
    let u = DVector::from_element(d, 1.0 / (d as f64).sqrt());
    let omega = DMatrix::from_diagonal(&DVector::from_row_slice(&diag)) + &u * u.transpose() * 2.0;
    let root = sccmtl_core::linalg::psd_sqrt(&omega);
    let ds = identity_tasks(&root, m, 0.0, 8);
    let cfg = SolverConfig::default().with_lowrank_weights(0.5 * m as f64, 1.0 * m as f64);
    let (dec, trace) = fit_diag_lowrank(&ds, &cfg).unwrap();
    assert!(trace.is_monotone(1e-12));
    assert_eq!(dec.rank_estimate, 1);
    let planted: Vec<usize> = (0..d).filter(|&j| diag[j] > 0.0).collect();
    assert_eq!(dec.sparse_part.support(), planted);
}

#[test]
fn loo_estimates_approach_the_full_fit_as_tasks_grow() {
    let root = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 0.7, 0.0, 0.0]));
    let spread = |m: usize| {
        let mut worst = 0.0_f64;
        for seed in 0..5 {
            let ds = identity_tasks(&root, m, 0.3, 100 + seed);
            let cfg = SolverConfig::default().with_lambda(0.09 * m as f64);
            let (full, _) = fit_scc_diagonal(&ds, &cfg).unwrap();
            for l in 0..m {
                let fit = fit_loo(&ds, l, &cfg, CovarianceStructure::Diagonal).unwrap();
                let CovarianceEstimate::Diagonal(loo) = fit.estimate else { unreachable!() };
                worst = worst.max((loo.omega() - full.omega()).amax());
            }
        }
        worst
    };
    let (small, large) = (spread(10), spread(100));
    assert!(large < small, "m = 10: {small}, m = 100: {large}");
}

#[test]
fn two_step_on_identity_designs_is_the_closed_form() {
    let root = DMatrix::from_diagonal(&DVector::from_row_slice(&[1.0, 0.0, 0.5]));
    let ds = identity_tasks(&root, 2000, 0.5, 13);
    let m = ds.n_tasks();
    let responses = DMatrix::from_fn(m, 3, |l, j| ds.task(l).response[j]);
    let inst = NormalMeansInstance::new(responses, 0.25, 0.25).unwrap();
    let cfg = SolverConfig::default().with_lambda(0.25 * m as f64).with_rel_tol(1e-14);
    let fit = two_step_fit(&ds, &cfg, CovarianceStructure::Diagonal, &RidgeSolveOptions::new(0.25)).unwrap();
    let diff = (fit.coefficients.to_matrix() - two_step_beta_closed_form(&inst)).amax();
    assert!(diff < 1e-8, "{diff}");
}

#[test]
fn noiseless_unpenalized_two_step_reproduces_truth() {
    let cfg = SyntheticConfig { m: 40, d: 6, n: 15, k: 6, noise_variance: 0.0, seed: 5, ..Default::default() };
    let (ds, truth) = generate_synthetic(&cfg).unwrap();
    let fit = two_step_fit(&ds, &SolverConfig::default(), CovarianceStructure::Diagonal, &RidgeSolveOptions::new(0.0))
        .unwrap();
    let err = (fit.coefficients.to_matrix() - &truth.betas).amax();
    assert!(err < 1e-8, "{err} {:?}", fit.covariance());
}

#[test]
fn correlated_designs_have_the_planted_correlation() {
    let cfg = SyntheticConfig { m: 1, d: 3, n: 100_000, k: 1, design_correlation: 0.5, seed: 3, ..Default::default() };
    let (ds, _) = generate_synthetic(&cfg).unwrap();
    let x = &ds.task(0).design;
    let n = x.nrows() as f64;
    for a in 0..3 {
        for b in (a + 1)..3 {
            let (ca, cb) = (x.column(a), x.column(b));
            let (ma, mb) = (ca.mean(), cb.mean());
            let cov = ca.iter().zip(cb.iter()).map(|(p, q)| (p - ma) * (q - mb)).sum::<f64>() / n;
            let va = ca.iter().map(|p| (p - ma).powi(2)).sum::<f64>() / n;
            let vb = cb.iter().map(|q| (q - mb).powi(2)).sum::<f64>() / n;
            let r = cov / (va * vb).sqrt();
            assert!((r - 0.5).abs() < 0.01, "columns {a},{b}: {r}");
        }
    }
}
