//! Per-task second moments used by the matrix-valued covariance solvers.
//!
//! With `G = XᵀX` and `c = Xᵀy`, the smooth part of every step-1 objective is
//! `½ Σ ‖y yᵀ − X Ω Xᵀ‖²_F = const − ⟨Ω, C⟩ + ½ ⟨Ω, H(Ω)⟩` where
//! `C = Σ c cᵀ` and `H(Ω) = Σ G Ω G`.

use nalgebra::DMatrix;

use crate::linalg;
use crate::model::MultiTaskDataset;

#[derive(Debug, Clone)]
pub(crate) struct Moments {
    pub grams: Vec<DMatrix<f64>>,
    pub c_outer: DMatrix<f64>,
    pub const_term: f64,
    pub dim: usize,
}

impl Moments {
    pub fn new(dataset: &MultiTaskDataset) -> Self {
        let d = dataset.dim();
        let mut grams = Vec::with_capacity(dataset.n_tasks());
        let mut c_outer = DMatrix::zeros(d, d);
        let mut const_term = 0.0;
        for t in dataset.tasks() {
            let g = linalg::gram(&t.design);
            let c = t.design.tr_mul(&t.response);
            c_outer.ger(1.0, &c, &c, 1.0);
            let yy = t.response.norm_squared();
            const_term += 0.5 * yy * yy;
            grams.push(g);
        }
        Self { grams, c_outer, const_term, dim: d }
    }

    /// `Σ G[idx,idx] W G[idx,idx]` for a symmetric `W` indexed by `idx`.
    pub fn apply_restricted(&self, sub_grams: &[DMatrix<f64>], w: &DMatrix<f64>) -> DMatrix<f64> {
        let s = w.nrows();
        let mut out = DMatrix::zeros(s, s);
        for g in sub_grams {
            let gw = g * w;
            out.gemm(1.0, &gw, g, 1.0);
        }
        linalg::symmetrize(&out)
    }

    pub fn sub_grams(&self, idx: &[usize]) -> Vec<DMatrix<f64>> {
        self.grams.iter().map(|g| linalg::select(g, idx, idx)).collect()
    }

    /// Full `d × d` value of `Σ G Ω G` for an `Ω` supported on `idx × idx`.
    pub fn apply_from_block(&self, idx: &[usize], w: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.dim;
        let mut out = DMatrix::zeros(d, d);
        if idx.is_empty() {
            return out;
        }
        for g in &self.grams {
            let g_cols = linalg::select_columns(g, idx);
            let left = &g_cols * w;
            out.gemm(1.0, &left, &g_cols.transpose(), 1.0);
        }
        out
    }

    /// `Σ G R Rᵀ G` for a factor `R` (d × r).
    pub fn apply_factor(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.dim;
        let mut out = DMatrix::zeros(d, d);
        if r.ncols() == 0 {
            return out;
        }
        for g in &self.grams {
            let gr = g * r;
            out.gemm(1.0, &gr, &gr.transpose(), 1.0);
        }
        out
    }
}
