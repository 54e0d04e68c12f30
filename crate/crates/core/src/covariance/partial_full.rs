//! Full PSD covariance with a weighted row-group penalty
//! `½ Σ ‖y yᵀ − X Ω Xᵀ‖²_F + λ Σ_k γ_k ‖Ω_k,:‖₂`.
//!
//! Solved by monotone proximal gradient on a working set of active rows. The
//! proximal step is approximate: a symmetric row shrink followed by PSD
//! projection of the surviving block. Every accepted step must pass both the
//! sufficient-decrease test on the smooth part and a plain decrease test on the
//! full objective, so the objective sequence is non-increasing. Rows outside
//! the working set are added when their gradient row norm exceeds `λ γ_k`.

use nalgebra::DMatrix;

use super::moments::Moments;
use super::SolveTrace;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{FullCovariance, MultiTaskDataset, SolverConfig};

const MIN_STEP_RATIO: f64 = 1e-14;
/// Most rows added to the working set per screen, unless it is already larger.
const SCREEN_BATCH: usize = 16;

pub fn fit_partial_full(
    dataset: &MultiTaskDataset,
    config: &SolverConfig,
) -> Result<(FullCovariance, SolveTrace)> {
    config.validate()?;
    dataset.ensure_valid()?;
    let moments = Moments::new(dataset);
    let gamma = config.gamma_for(dataset.dim())?;
    solve_partial_full(&moments, config.lambda, &gamma, None, config)
}

/// Row-group penalty `λ Σ_k γ_k ‖Ω_k,:‖`.
pub(crate) fn group_penalty(omega: &DMatrix<f64>, lambda: f64, gamma: &[f64]) -> f64 {
    (0..omega.nrows())
        .map(|k| gamma[k] * omega.row(k).norm())
        .sum::<f64>()
        * lambda
}

/// Smallest `λ` at which the first proximal step from zero keeps every row at zero.
pub(crate) fn partial_full_zero_threshold(moments: &Moments, gamma: &[f64]) -> f64 {
    (0..moments.dim)
        .map(|k| moments.c_outer.row(k).norm() / gamma[k])
        .fold(0.0, f64::max)
}

struct Block<'a> {
    moments: &'a Moments,
    idx: Vec<usize>,
    grams: Vec<DMatrix<f64>>,
    c_outer: DMatrix<f64>,
    gamma: Vec<f64>,
    lambda: f64,
}

impl<'a> Block<'a> {
    fn new(moments: &'a Moments, idx: Vec<usize>, gamma_full: &[f64], lambda: f64) -> Self {
        let grams = moments.sub_grams(&idx);
        let c_outer = linalg::select(&moments.c_outer, &idx, &idx);
        let gamma = idx.iter().map(|&k| gamma_full[k]).collect();
        Self { moments, idx, grams, c_outer, gamma, lambda }
    }

    /// Smooth value and gradient at `w`.
    fn smooth(&self, w: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let h = self.moments.apply_restricted(&self.grams, w);
        let f = self.moments.const_term - linalg::frob_dot(w, &self.c_outer)
            + 0.5 * linalg::frob_dot(w, &h);
        (f, h - &self.c_outer)
    }

    fn penalty(&self, w: &DMatrix<f64>) -> f64 {
        group_penalty(w, self.lambda, &self.gamma)
    }

    /// Symmetric row shrink with thresholds `t λ γ_k`, then PSD projection of
    /// the rows that survive.
    fn prox(&self, v: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
        let s = v.nrows();
        let factors: Vec<f64> = (0..s)
            .map(|k| {
                let norm = v.row(k).norm();
                if norm > 0.0 {
                    (1.0 - t * self.lambda * self.gamma[k] / norm).max(0.0)
                } else {
                    0.0
                }
            })
            .collect();
        let alive: Vec<usize> = (0..s).filter(|&k| factors[k] > 0.0).collect();
        let mut out = DMatrix::zeros(s, s);
        if alive.is_empty() {
            return out;
        }
        let shrunk = DMatrix::from_fn(alive.len(), alive.len(), |i, j| {
            let (a, b) = (alive[i], alive[j]);
            0.5 * (v[(a, b)] + v[(b, a)]) * 0.5 * (factors[a] + factors[b])
        });
        let projected = linalg::project_psd(&shrunk);
        for (i, &a) in alive.iter().enumerate() {
            for (j, &b) in alive.iter().enumerate() {
                out[(a, b)] = projected[(i, j)];
            }
        }
        out
    }

    fn initial_step(&self) -> f64 {
        // Inverse Rayleigh quotient of H at the identity: an optimistic 1/L.
        let s = self.idx.len();
        let eye = DMatrix::<f64>::identity(s, s);
        let h = self.moments.apply_restricted(&self.grams, &eye);
        let q = linalg::frob_dot(&eye, &h) / s as f64;
        if q > 0.0 {
            1.0 / q
        } else {
            1.0
        }
    }
}

struct PgState {
    values: Vec<f64>,
    iterations: usize,
    stalled: bool,
    converged: bool,
}

/// Runs monotone proximal gradient on one working set. Returns the updated block.
fn solve_block(
    block: &Block,
    mut w: DMatrix<f64>,
    step: &mut f64,
    state: &mut PgState,
    rel_tol: f64,
    max_iter: usize,
) -> DMatrix<f64> {
    let (mut f, mut grad) = block.smooth(&w);
    let mut obj = f + block.penalty(&w);
    let base_step = *step;
    state.converged = false;
    state.stalled = false;
    while state.iterations < max_iter {
        state.iterations += 1;
        let mut t = *step;
        let accepted = loop {
            let v = &w - &grad * t;
            let p = block.prox(&v, t);
            let diff = &p - &w;
            let (fp, gp) = block.smooth(&p);
            let model = f + linalg::frob_dot(&grad, &diff) + linalg::frobenius_sq(&diff) / (2.0 * t);
            let objp = fp + block.penalty(&p);
            let slack = 1e-13 * obj.abs().max(1.0);
            if fp <= model + slack && objp <= obj {
                break Some((p, fp, gp, objp));
            }
            t *= 0.5;
            if t < base_step * MIN_STEP_RATIO {
                break None;
            }
        };
        match accepted {
            Some((p, fp, gp, objp)) => {
                let decrease = obj - objp;
                w = p;
                f = fp;
                grad = gp;
                obj = objp;
                state.values.push(obj);
                *step = t * 1.5;
                if decrease <= rel_tol * obj.abs().max(f64::MIN_POSITIVE) {
                    state.converged = true;
                    break;
                }
            }
            None => {
                // No step of any size decreases the objective: stationary up to
                // the accuracy of the approximate prox.
                state.values.push(obj);
                state.stalled = true;
                state.converged = true;
                break;
            }
        }
    }
    w
}

pub(crate) fn solve_partial_full(
    moments: &Moments,
    lambda: f64,
    gamma: &[f64],
    start: Option<&DMatrix<f64>>,
    config: &SolverConfig,
) -> Result<(FullCovariance, SolveTrace)> {
    let d = moments.dim;
    if gamma.len() != d {
        return Err(Error::DimensionMismatch("gamma length differs from d".into()));
    }
    let mut omega = match start {
        Some(s) if s.nrows() == d && s.ncols() == d => s.clone(),
        Some(_) => return Err(Error::DimensionMismatch("warm start has wrong shape".into())),
        None => DMatrix::zeros(d, d),
    };
    let zero_objective = moments.const_term;
    let full_objective = |om: &DMatrix<f64>| {
        let support: Vec<usize> = (0..d).filter(|&k| om.row(k).iter().any(|&v| v != 0.0)).collect();
        let block = linalg::select(om, &support, &support);
        let h = moments.apply_restricted(&moments.sub_grams(&support), &block);
        let f = moments.const_term - linalg::frob_dot(&block, &linalg::select(&moments.c_outer, &support, &support))
            + 0.5 * linalg::frob_dot(&block, &h);
        f + group_penalty(om, lambda, gamma)
    };
    let mut state = PgState {
        values: vec![full_objective(&omega)],
        iterations: 0,
        stalled: false,
        converged: false,
    };
    let mut step = f64::NAN;
    let mut working: Vec<usize> =
        (0..d).filter(|&k| omega.row(k).iter().any(|&v| v != 0.0)).collect();
    loop {
        // KKT screen for rows outside the working set.
        let block_now = linalg::select(&omega, &working, &working);
        let h_full = moments.apply_from_block(&working, &block_now);
        let grad_full = h_full - &moments.c_outer;
        let in_set: std::collections::HashSet<usize> = working.iter().cloned().collect();
        let mut violators: Vec<(f64, usize)> = (0..d)
            .filter(|k| !in_set.contains(k))
            .map(|k| (grad_full.row(k).norm() / (lambda * gamma[k]).max(f64::MIN_POSITIVE), k))
            .filter(|&(ratio, _)| ratio > 1.0 + 1e-9)
            .collect();
        violators.sort_by(|a, b| b.0.total_cmp(&a.0));
        violators.truncate(SCREEN_BATCH.max(working.len()));
        let violators: Vec<usize> = violators.into_iter().map(|(_, k)| k).collect();
        if violators.is_empty() && state.converged {
            break;
        }
        if violators.is_empty() && working.is_empty() {
            state.converged = true;
            break;
        }
        working.extend(violators);
        working.sort_unstable();
        let block = Block::new(moments, working.clone(), gamma, lambda);
        if !step.is_finite() {
            step = block.initial_step();
        }
        let w0 = linalg::select(&omega, &working, &working);
        let before = state.iterations;
        let w = solve_block(&block, w0, &mut step, &mut state, config.rel_tol, config.max_iter);
        omega = DMatrix::zeros(d, d);
        for (i, &a) in working.iter().enumerate() {
            for (j, &b) in working.iter().enumerate() {
                omega[(a, b)] = w[(i, j)];
            }
        }
        // The working set only grows: a screened row can still be zeroed by the
        // PSD projection, and dropping it would let the screen re-add it forever.
        if state.iterations >= config.max_iter {
            state.converged = false;
            break;
        }
        if state.iterations == before {
            break;
        }
    }
    let mut objective = *state.values.last().unwrap();
    if objective > zero_objective {
        omega = DMatrix::zeros(d, d);
        objective = zero_objective;
        state.values.push(objective);
    }
    let active = (0..d).filter(|&k| omega.row(k).iter().any(|&v| v != 0.0)).count();
    let cov = FullCovariance::new(omega)
        .map_err(|e| Error::Internal(format!("partial-full projection produced an invalid covariance: {e}")))?;
    Ok((
        cov,
        SolveTrace {
            objective_values: state.values,
            iterations: state.iterations,
            converged: state.converged,
            active_set_size: active,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TaskData;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn identity_tasks(d: usize, m: usize, omega_sqrt: &DMatrix<f64>, seed: u64) -> MultiTaskDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tasks = (0..m)
            .map(|_| {
                let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
                TaskData::new(DMatrix::identity(d, d), omega_sqrt * z)
            })
            .collect();
        MultiTaskDataset::new(tasks).unwrap()
    }

    #[test]
    fn unpenalized_identity_fit_is_second_moment() {
        let (d, m) = (3, 500);
        let root = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, 0.0, 0.3, 0.8, 0.2, 0.0, 0.2, 0.5]);
        let ds = identity_tasks(d, m, &root, 3);
        let mut moment = DMatrix::zeros(d, d);
        for t in ds.tasks() {
            moment += &t.response * t.response.transpose();
        }
        moment /= m as f64;
        let cfg = SolverConfig::default().with_rel_tol(1e-14);
        let (cov, trace) = fit_partial_full(&ds, &cfg).unwrap();
        assert!((cov.matrix() - &moment).amax() < 1e-6, "{}", (cov.matrix() - &moment).amax());
        assert!(trace.is_monotone(1e-12));
    }

    #[test]
    fn huge_lambda_gives_zero() {
        let root = DMatrix::identity(3, 3);
        let ds = identity_tasks(3, 20, &root, 1);
        let cfg = SolverConfig::default().with_lambda(1e12);
        let (cov, _) = fit_partial_full(&ds, &cfg).unwrap();
        assert_eq!(cov.matrix(), &DMatrix::zeros(3, 3));
    }

    #[test]
    fn zero_threshold_is_tight() {
        let root = DMatrix::identity(4, 4);
        let ds = identity_tasks(4, 30, &root, 9);
        let mom = Moments::new(&ds);
        let gamma = vec![1.0; 4];
        let thr = partial_full_zero_threshold(&mom, &gamma);
        let cfg = SolverConfig::default();
        let (cov, _) = solve_partial_full(&mom, thr * 1.0001, &gamma, None, &cfg).unwrap();
        assert!(cov.row_support().is_empty());
        let (cov, _) = solve_partial_full(&mom, thr * 0.9, &gamma, None, &cfg).unwrap();
        assert!(!cov.row_support().is_empty());
    }
}
