//! Shared fixtures for the solver benchmarks.

use sccmtl_core::experiments::{generate_synthetic, SyntheticConfig};
use sccmtl_core::MultiTaskDataset;

/// Fully shared synthetic problem with `m` tasks, `d` features, `n` rows per
/// task and `k` active features.
pub fn synthetic_problem(m: usize, d: usize, n: usize, k: usize) -> MultiTaskDataset {
    let config = SyntheticConfig { m, d, n, k, seed: 11, ..Default::default() };
    generate_synthetic(&config).expect("valid benchmark config").0
}

/// Problem sizes used across the benchmarks: small, medium and the desk-scale
/// experiment size.
pub const SIZES: [(usize, usize, usize, usize); 3] = [(10, 32, 40, 4), (20, 96, 80, 16), (30, 256, 150, 50)];
