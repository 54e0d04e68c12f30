//! Synthetic joint-sparsity benchmark data.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MultiTaskDataset, TaskData};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub m: usize,
    pub d: usize,
    pub n: usize,
    pub k: usize,
    pub overlap_fraction: f64,
    pub noise_variance: f64,
    pub design_correlation: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            m: 30,
            d: 256,
            n: 150,
            k: 50,
            overlap_fraction: 1.0,
            noise_variance: 0.1,
            design_correlation: 0.0,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.d == 0 {
            return Err(Error::InvalidConfig("m, n and d must be >= 1".into()));
        }
        if self.k < 1 || self.k > self.d {
            return Err(Error::InvalidConfig(format!("k must lie in 1..=d (d = {}), got {}", self.d, self.k)));
        }
        if !(0.0..=1.0).contains(&self.overlap_fraction) {
            return Err(Error::InvalidConfig(format!(
                "overlap_fraction must lie in [0, 1], got {}",
                self.overlap_fraction
            )));
        }
        if !(self.noise_variance >= 0.0) || !self.noise_variance.is_finite() {
            return Err(Error::InvalidConfig("noise_variance must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.design_correlation) {
            return Err(Error::InvalidConfig(format!(
                "design_correlation must lie in [0, 1), got {}",
                self.design_correlation
            )));
        }
        Ok(())
    }

    /// Size of the support core common to every task.
    pub fn shared_size(&self) -> usize {
        ((self.overlap_fraction * self.k as f64).ceil() as usize).min(self.k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// `m × d`, one task per row.
    pub betas: DMatrix<f64>,
    pub shared_support: Vec<usize>,
    pub per_task_support: Vec<Vec<usize>>,
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<(MultiTaskDataset, GroundTruth)> {
    generate_synthetic_run(config, 0)
}

/// Data for run `run`: the generator is seeded with `config.seed` and uses
/// `run` as its stream, so runs are independent of execution order.
pub fn generate_synthetic_run(config: &SyntheticConfig, run: u64) -> Result<(MultiTaskDataset, GroundTruth)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(run);
    let (m, d, n, k) = (config.m, config.d, config.n, config.k);

    let core_size = config.shared_size();
    let mut perm = sample(&mut rng, d, d).into_vec();
    let rest = perm.split_off(core_size);
    let mut shared_support = perm;
    shared_support.sort_unstable();

    let mut betas = DMatrix::zeros(m, d);
    let mut per_task_support = Vec::with_capacity(m);
    for l in 0..m {
        let mut support = shared_support.clone();
        support.extend(sample(&mut rng, rest.len(), k - core_size).iter().map(|i| rest[i]));
        support.sort_unstable();
        for &j in &support {
            betas[(l, j)] = rng.sample(StandardNormal);
        }
        per_task_support.push(support);
    }

    let rho = config.design_correlation;
    let a = (1.0 - rho).sqrt();
    let b = (1.0 - rho + rho * d as f64).sqrt() - a;
    let sd = config.noise_variance.sqrt();
    let tasks = (0..m)
        .map(|l| {
            let mut x = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
            if rho > 0.0 {
                // symmetric square root of (1 − ρ)I + ρ11ᵀ applied to each row
                for i in 0..n {
                    let mean = x.row(i).sum() / d as f64;
                    for j in 0..d {
                        x[(i, j)] = a * x[(i, j)] + b * mean;
                    }
                }
            }
            let beta = betas.row(l).transpose();
            let noise = DVector::from_fn(n, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
            let y = &x * beta + noise;
            TaskData::new(x, y)
        })
        .collect();
    Ok((MultiTaskDataset::new_unchecked(tasks, d), GroundTruth { betas, shared_support, per_task_support }))
}
