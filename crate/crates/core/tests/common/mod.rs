#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use sccmtl_core::covariance::SolveTrace;
use sccmtl_core::regression::{group_lasso_kkt_violation, group_lasso_objective, variational_objective};
use sccmtl_core::{
    build_scc_quadratic, fit_diag_lowrank, fit_partial_full, fit_scc_diagonal, fit_scc_trace, group_lasso_fit,
    ridge_with_covariance, two_step_fit, CovarianceEstimate, CovarianceStructure, DiagonalCovariance,
    FullCovariance, MultiTaskDataset, RidgeSolveOptions, SolverConfig, TaskData,
};

pub type Check = Result<(), String>;

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| gaussian(rng))
}

/// Random dataset with `m` tasks of `n` rows and `d` features.
pub fn random_dataset(rng: &mut ChaCha8Rng, m: usize, d: usize, n: usize) -> MultiTaskDataset {
    let tasks = (0..m)
        .map(|_| {
            let x = random_matrix(rng, n, d);
            let y = DVector::from_fn(n, |_, _| gaussian(rng));
            TaskData::new(x, y)
        })
        .collect();
    MultiTaskDataset::new(tasks).unwrap()
}

/// Small instance drawn from `seed`: `m ≤ 4`, `d ≤ 5`, `n ≤ 6`.
pub fn small_instance(seed: u64) -> MultiTaskDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..=4);
    let d = rng.random_range(1..=5);
    let n = rng.random_range(1..=6);
    random_dataset(&mut rng, m, d, n)
}

/// Instance with full-column-rank designs (`n > d`) and `m ≥ 2`.
pub fn regular_instance(seed: u64) -> MultiTaskDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(2..=5);
    let d = rng.random_range(2..=6);
    let n = d + rng.random_range(2..=6);
    random_dataset(&mut rng, m, d, n)
}

fn tight() -> SolverConfig {
    SolverConfig::default().with_rel_tol(1e-15).with_max_iter(200_000)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn expansion_invariant(seed: u64) -> Check {
    let ds = small_instance(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let omega = DVector::from_fn(ds.dim(), |_, _| rng.random_range(0.0..2.0));
    let quad = build_scc_quadratic(&ds).map_err(|e| e.to_string())?;
    let direct: f64 = ds
        .tasks()
        .iter()
        .map(|t| {
            let yyt = &t.response * t.response.transpose();
            let model = &t.design * DMatrix::from_diagonal(&omega) * t.design.transpose();
            0.5 * (yyt - model).norm_squared()
        })
        .sum();
    let value = quad.value(&omega);
    if rel_close(value, direct, 1e-10) {
        Ok(())
    } else {
        Err(format!("seed {seed}: quadratic {value} vs direct {direct}"))
    }
}

pub fn scc_kkt(seed: u64) -> Check {
    let ds = regular_instance(seed);
    let quad = build_scc_quadratic(&ds).unwrap();
    let lambda = 0.2 * quad.zero_threshold();
    let (cov, _) = fit_scc_diagonal(&ds, &tight().with_lambda(lambda)).map_err(|e| e.to_string())?;
    let violation = quad.kkt_violation(cov.omega(), &quad.l1_penalty(lambda));
    let scale = quad.corr_sq.amax().max(1.0);
    if violation <= 1e-6 * scale {
        Ok(())
    } else {
        Err(format!("seed {seed}: scc KKT violation {violation:.3e} (scale {scale:.3e})"))
    }
}

pub fn group_lasso_kkt(seed: u64) -> Check {
    let ds = regular_instance(seed);
    let lambda = 0.3 * sccmtl_core::regression::group_lasso_zero_threshold(&ds);
    let res = group_lasso_fit(&ds, lambda, &tight()).map_err(|e| e.to_string())?;
    let violation = group_lasso_kkt_violation(&ds, &res.coefficients, lambda);
    if violation <= 1e-6 * lambda.max(1.0) {
        Ok(())
    } else {
        Err(format!("seed {seed}: group lasso KKT violation {violation:.3e} at lambda {lambda:.3e}"))
    }
}

fn monotone(name: &str, seed: u64, trace: &SolveTrace) -> Check {
    if trace.is_monotone(1e-12) {
        Ok(())
    } else {
        Err(format!("seed {seed}: {name} objective trace increases"))
    }
}

pub fn monotone_traces(seed: u64) -> Check {
    let ds = regular_instance(seed);
    let quad = build_scc_quadratic(&ds).unwrap();
    let l = 0.1 * quad.zero_threshold();
    let cfg = SolverConfig::default().with_lambda(l).with_lowrank_weights(l, l);
    monotone("scc", seed, &fit_scc_diagonal(&ds, &cfg).map_err(|e| e.to_string())?.1)?;
    let cfg_t = cfg.clone().with_lambda(0.1 * quad.trace_zero_threshold());
    monotone("scc trace", seed, &fit_scc_trace(&ds, &cfg_t).map_err(|e| e.to_string())?.1)?;
    monotone("partial full", seed, &fit_partial_full(&ds, &cfg).map_err(|e| e.to_string())?.1)?;
    monotone("diag+lowrank", seed, &fit_diag_lowrank(&ds, &cfg).map_err(|e| e.to_string())?.1)?;
    let gl = 0.2 * sccmtl_core::regression::group_lasso_zero_threshold(&ds);
    monotone("group lasso", seed, &group_lasso_fit(&ds, gl, &cfg).map_err(|e| e.to_string())?.trace)
}

/// `ω_j = 0` forces `β̂_j = 0` exactly, for every task and any response.
pub fn zero_coordinate(seed: u64) -> Check {
    let ds = regular_instance(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x2e20);
    let d = ds.dim();
    let omega = DVector::from_fn(d, |j, _| if j % 2 == 0 { 0.0 } else { rng.random_range(0.1..2.0) });
    let est = CovarianceEstimate::Diagonal(DiagonalCovariance::new(omega.clone()).unwrap());
    let opts = RidgeSolveOptions::new(rng.random_range(0.01..1.0));
    for (l, t) in ds.tasks().iter().enumerate() {
        let beta = ridge_with_covariance(t, &est, &opts).map_err(|e| e.to_string())?;
        for j in (0..d).step_by(2) {
            if beta[j] != 0.0 {
                return Err(format!("seed {seed}: task {l} coordinate {j} is {:e} with omega_j = 0", beta[j]));
            }
        }
    }
    Ok(())
}

/// Identical inputs give bit-identical outputs.
pub fn determinism(seed: u64) -> Check {
    let ds = regular_instance(seed);
    let quad = build_scc_quadratic(&ds).unwrap();
    let cfg = SolverConfig::default()
        .with_lambda(0.1 * quad.zero_threshold())
        .with_ridge_lambda(0.1)
        .with_lowrank_weights(0.1 * quad.zero_threshold(), 0.1 * quad.zero_threshold());
    for structure in [
        CovarianceStructure::Diagonal,
        CovarianceStructure::DiagonalTrace,
        CovarianceStructure::PartialFull,
        CovarianceStructure::DiagLowRank,
    ] {
        let opts = RidgeSolveOptions::new(0.1);
        let a = two_step_fit(&ds, &cfg, structure, &opts).map_err(|e| e.to_string())?;
        let b = two_step_fit(&ds, &cfg, structure, &opts).map_err(|e| e.to_string())?;
        if a.coefficients != b.coefficients || a.covariances != b.covariances {
            return Err(format!("seed {seed}: {structure:?} fit is not reproducible"));
        }
    }
    let gl = 0.2 * sccmtl_core::regression::group_lasso_zero_threshold(&ds);
    let a = group_lasso_fit(&ds, gl, &cfg).map_err(|e| e.to_string())?;
    let b = group_lasso_fit(&ds, gl, &cfg).map_err(|e| e.to_string())?;
    if a.coefficients != b.coefficients || a.implied_omega != b.implied_omega {
        return Err(format!("seed {seed}: group lasso fit is not reproducible"));
    }
    Ok(())
}

pub fn permutation_equivariance(seed: u64) -> Check {
    let ds = regular_instance(seed);
    let d = ds.dim();
    let perm: Vec<usize> = (0..d).map(|j| (j * 3 + 1) % d).collect();
    let mut seen = vec![false; d];
    for &p in &perm {
        seen[p] = true;
    }
    let perm: Vec<usize> = if seen.iter().all(|&s| s) { perm } else { (0..d).rev().collect() };
    let quad = build_scc_quadratic(&ds).unwrap();
    let cfg = tight().with_lambda(0.1 * quad.zero_threshold());
    let (base, _) = fit_scc_diagonal(&ds, &cfg).map_err(|e| e.to_string())?;
    let (permuted, _) = fit_scc_diagonal(&ds.permute_features(&perm), &cfg).map_err(|e| e.to_string())?;
    let scale = base.omega().amax().max(1e-12);
    for (new_j, &old_j) in perm.iter().enumerate() {
        if (permuted.omega()[new_j] - base.omega()[old_j]).abs() > 1e-7 * scale {
            return Err(format!("seed {seed}: permuted omega differs at {new_j}: {} vs {} (scale {scale})", permuted.omega()[new_j], base.omega()[old_j]));
        }
    }
    Ok(())
}

/// At `λ = 0` scaling every response by `c` scales `ω̂` by `c²`.
pub fn response_scaling(seed: u64) -> Check {
    let ds = regular_instance(seed);
    let c = 1.7;
    let scaled = MultiTaskDataset::new(
        ds.tasks().iter().map(|t| TaskData::new(t.design.clone(), &t.response * c)).collect(),
    )
    .unwrap();
    let (a, _) = fit_scc_diagonal(&ds, &tight()).map_err(|e| e.to_string())?;
    let (b, _) = fit_scc_diagonal(&scaled, &tight()).map_err(|e| e.to_string())?;
    let diff = (b.omega() - a.omega() * (c * c)).amax();
    if diff <= 1e-7 * b.omega().amax().max(1.0) {
        Ok(())
    } else {
        Err(format!("seed {seed}: c² scaling off by {diff:.3e}"))
    }
}

/// For invertible `Ω` the singular-safe solve equals `(XᵀX + λΩ⁻¹)⁻¹Xᵀy`.
pub fn ridge_matches_direct_formula(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=10);
    let n = rng.random_range(1..=12);
    let x = random_matrix(&mut rng, n, d);
    let y = DVector::from_fn(n, |_, _| gaussian(&mut rng));
    let root = random_matrix(&mut rng, d, d);
    let omega = &root * root.transpose() + DMatrix::identity(d, d) * 0.5;
    let lambda = rng.random_range(0.05..2.0);
    let est = CovarianceEstimate::Full(FullCovariance::new(omega.clone()).unwrap());
    let beta = ridge_with_covariance(&TaskData::new(x.clone(), y.clone()), &est, &RidgeSolveOptions::new(lambda))
        .map_err(|e| e.to_string())?;
    let inv = omega.clone().try_inverse().unwrap();
    let system = x.transpose() * &x + inv * lambda;
    let direct = system.lu().solve(&(x.transpose() * &y)).unwrap();
    let err = (&beta - &direct).norm() / direct.norm().max(1e-300);
    if err <= 1e-8 {
        Ok(())
    } else {
        Err(format!("seed {seed}: relative difference {err:.3e} from the direct formula"))
    }
}

/// The variational objective at the implied `ω` equals the group Lasso objective.
pub fn variational_equivalence(seed: u64) -> Check {
    let ds = regular_instance(seed);
    let lambda = 0.3 * sccmtl_core::regression::group_lasso_zero_threshold(&ds);
    let res = group_lasso_fit(&ds, lambda, &tight()).map_err(|e| e.to_string())?;
    let primal = group_lasso_objective(&ds, &res.coefficients, lambda);
    let variational = variational_objective(&ds, &res.coefficients, &res.implied_omega, lambda);
    if rel_close(primal, variational, 1e-8) {
        Ok(())
    } else {
        Err(format!("seed {seed}: group lasso objective {primal} vs variational {variational}"))
    }
}

/// Every property suite, in a fixed order.
pub const SUITES: [(&str, fn(u64) -> Check); 10] = [
    ("quadratic expansion", expansion_invariant),
    ("scc KKT", scc_kkt),
    ("group lasso KKT", group_lasso_kkt),
    ("monotone traces", monotone_traces),
    ("zero coordinate", zero_coordinate),
    ("seed determinism", determinism),
    ("permutation equivariance", permutation_equivariance),
    ("response scaling", response_scaling),
    ("ridge direct formula", ridge_matches_direct_formula),
    ("variational equivalence", variational_equivalence),
];
