//! Sparse/low-rank identifiability quantities of a diagonal-plus-low-rank
//! decomposition.
//!
//! `α = max(‖sign(Ω_S)‖_{1→1}, ‖sign(Ω_S)‖_{∞→∞})` and
//! `β = ‖UUᵀ‖_∞ + ‖VVᵀ‖_∞ + ‖U‖_{2→∞}‖V‖_{2→∞}` with `U = V` the eigenvectors
//! spanning the range of the PSD part `Ω_L`. `αβ < 1` certifies that the
//! decomposition is unique.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::model::DiagPlusLowRank;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    pub alpha: f64,
    pub beta: f64,
    pub product: f64,
    pub identifiable: bool,
    pub rank: usize,
}

/// Orthonormal basis of the range of a PSD matrix.
fn range_basis(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = linalg::sym_eigen(m);
    let top = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let tol = linalg::psd_tolerance(top);
    let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&k| eig.eigenvalues[k] > tol).collect();
    linalg::select_columns(&eig.eigenvectors, &keep)
}

pub fn identifiability_report(decomp: &DiagPlusLowRank) -> IdentifiabilityReport {
    // sign(Ω_S) is diagonal, so both operator norms are the largest |sign|.
    let alpha = if decomp.sparse_part.omega().iter().any(|&w| w != 0.0) { 1.0 } else { 0.0 };
    let u = range_basis(decomp.lowrank_part.matrix());
    let rank = u.ncols();
    let beta = if rank == 0 {
        0.0
    } else {
        let proj = &u * u.transpose();
        let proj_max = linalg::max_abs(&proj);
        let row_max_sq = u.row_iter().map(|r| r.norm_squared()).fold(0.0, f64::max);
        2.0 * proj_max + row_max_sq
    };
    let product = alpha * beta;
    IdentifiabilityReport { alpha, beta, product, identifiable: product < 1.0, rank }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DiagonalCovariance, FullCovariance};
    use nalgebra::DVector;

    fn decomp(diag: &[f64], low: DMatrix<f64>) -> DiagPlusLowRank {
        DiagPlusLowRank::new(
            DiagonalCovariance::new(DVector::from_row_slice(diag)).unwrap(),
            FullCovariance::new(low).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn diagonal_only() {
        let r = identifiability_report(&decomp(&[1.0, 2.0, 3.0], DMatrix::zeros(3, 3)));
        assert_eq!((r.alpha, r.beta, r.product), (1.0, 0.0, 0.0));
        assert!(r.identifiable);
    }

    #[test]
    fn coordinate_axis_is_maximally_coherent() {
        let mut low = DMatrix::zeros(3, 3);
        low[(0, 0)] = 1.0;
        let r = identifiability_report(&decomp(&[0.0, 1.0, 1.0], low));
        assert!((r.beta - 3.0).abs() < 1e-12);
        assert!(!r.identifiable);
    }

    #[test]
    fn flat_rank_one() {
        let d = 16;
        let low = DMatrix::from_element(d, d, 1.0 / d as f64);
        let r = identifiability_report(&decomp(&vec![1.0; d], low));
        assert_eq!(r.alpha, 1.0);
        assert!((r.beta - 3.0 / 16.0).abs() < 1e-10);
        assert!(r.identifiable);
    }
}
