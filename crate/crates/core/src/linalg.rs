//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative symmetry tolerance: `max|M - Mᵀ| <= SYM_TOL * (1 + max|M|)`.
pub const SYM_TOL: f64 = 1e-10;
/// Relative PSD tolerance: `min eig >= -PSD_TOL * (1 + max eig)`.
pub const PSD_TOL: f64 = 1e-8;
/// Eigenvalue floor used before inverting square roots.
pub const EIGEN_FLOOR: f64 = 1e-12;

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn symmetry_tolerance(m: &DMatrix<f64>) -> f64 {
    SYM_TOL * (1.0 + max_abs(m))
}

/// Eigendecomposition of a symmetric matrix (input is symmetrized first).
pub fn sym_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(symmetrize(m))
}

pub fn psd_tolerance(largest_eigenvalue: f64) -> f64 {
    PSD_TOL * (1.0 + largest_eigenvalue.max(0.0))
}

/// Rebuilds `V f(Λ) Vᵀ` from an eigendecomposition.
pub fn spectral_map(
    eig: &SymmetricEigen<f64, nalgebra::Dyn>,
    f: impl Fn(f64) -> f64,
) -> DMatrix<f64> {
    let mut scaled = eig.eigenvectors.clone();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let s = f(lam);
        scaled.column_mut(k).scale_mut(s);
    }
    let out = scaled * eig.eigenvectors.transpose();
    symmetrize(&out)
}

/// Euclidean projection onto the PSD cone (eigenvalue clipping).
pub fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = sym_eigen(m);
    spectral_map(&eig, |l| l.max(0.0))
}

/// Square root of a PSD matrix, clipping negative round-off eigenvalues to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = sym_eigen(m);
    spectral_map(&eig, |l| l.max(0.0).sqrt())
}

/// `M^{-1/2}` for a symmetric positive definite matrix, with eigenvalues floored
/// at [`EIGEN_FLOOR`].
pub fn spd_inv_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = sym_eigen(m);
    spectral_map(&eig, |l| 1.0 / l.max(EIGEN_FLOOR).sqrt())
}

/// Factor `R` (d × r) with `R Rᵀ = M` restricted to the eigenvalues above the
/// PSD tolerance. Columns are `sqrt(λ_k) v_k`.
pub fn psd_range_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = sym_eigen(m);
    let top = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let tol = psd_tolerance(top);
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&k| eig.eigenvalues[k] > tol)
        .collect();
    let d = m.nrows();
    let mut r = DMatrix::zeros(d, keep.len());
    for (c, &k) in keep.iter().enumerate() {
        let s = eig.eigenvalues[k].sqrt();
        r.set_column(c, &(eig.eigenvectors.column(k) * s));
    }
    r
}

pub fn frobenius_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}

/// Frobenius inner product `<A, B>`.
pub fn frob_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.tr_mul(x)
}

/// Submatrix with the given rows and columns.
pub fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |i, j| m[(i, cols[j])])
}

pub fn select_entries(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

pub fn all_finite<'a>(values: impl IntoIterator<Item = &'a f64>) -> bool {
    values.into_iter().all(|v| v.is_finite())
}
