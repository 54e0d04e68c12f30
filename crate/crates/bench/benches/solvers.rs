use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sccmtl_bench::{synthetic_problem, SIZES};
use sccmtl_core::experiments::penalty_scale;
use sccmtl_core::{
    build_scc_quadratic, fit_partial_full, fit_scc_diagonal, group_lasso_fit, two_step_fit, CovarianceStructure,
    RidgeSolveOptions, SolverConfig,
};

fn label(&(m, d, n, k): &(usize, usize, usize, usize)) -> String {
    format!("m{m}_d{d}_n{n}_k{k}")
}

fn scc(c: &mut Criterion) {
    let mut group = c.benchmark_group("scc_diagonal");
    for size in &SIZES {
        let ds = synthetic_problem(size.0, size.1, size.2, size.3);
        let config = SolverConfig::default().with_lambda(0.1 * penalty_scale(&ds));
        group.bench_with_input(BenchmarkId::new("quadratic", label(size)), &ds, |b, ds| {
            b.iter(|| build_scc_quadratic(black_box(ds)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("fit", label(size)), &ds, |b, ds| {
            b.iter(|| fit_scc_diagonal(black_box(ds), &config).unwrap())
        });
    }
    group.finish();
}

fn group_lasso(c: &mut Criterion) {
    let mut group = c.benchmark_group("group_lasso");
    group.sample_size(10);
    for size in &SIZES {
        let ds = synthetic_problem(size.0, size.1, size.2, size.3);
        let lambda = (0.1 * size.0 as f64).sqrt() * 10.0;
        group.bench_with_input(BenchmarkId::from_parameter(label(size)), &ds, |b, ds| {
            b.iter(|| group_lasso_fit(black_box(ds), lambda, &SolverConfig::default()).unwrap())
        });
    }
    group.finish();
}

fn partial_full(c: &mut Criterion) {
    let mut group = c.benchmark_group("partial_full");
    group.sample_size(10);
    for size in &SIZES[..2] {
        let ds = synthetic_problem(size.0, size.1, size.2, size.3);
        let config = SolverConfig::default().with_lambda(0.1 * penalty_scale(&ds));
        group.bench_with_input(BenchmarkId::from_parameter(label(size)), &ds, |b, ds| {
            b.iter(|| fit_partial_full(black_box(ds), &config).unwrap())
        });
    }
    group.finish();
}

fn two_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("two_step");
    group.sample_size(10);
    for size in &SIZES {
        let ds = synthetic_problem(size.0, size.1, size.2, size.3);
        let config = SolverConfig::default().with_lambda(0.1 * penalty_scale(&ds));
        group.bench_with_input(BenchmarkId::from_parameter(label(size)), &ds, |b, ds| {
            b.iter(|| {
                two_step_fit(black_box(ds), &config, CovarianceStructure::Diagonal, &RidgeSolveOptions::new(0.1))
                    .unwrap()
            })
        });
    }
    group.finish();
}

criterion_group!(benches, scc, group_lasso, partial_full, two_step);
criterion_main!(benches);
