//! Coefficient recovery metrics.

use crate::error::{Error, Result};
use crate::model::CoefficientSet;

use super::synthetic::GroundTruth;

/// Relative row-norm threshold below which a feature counts as not selected.
pub const SUPPORT_THRESHOLD: f64 = 1e-6;

fn check_shapes(estimate: &CoefficientSet, truth: &GroundTruth) -> Result<()> {
    if estimate.n_tasks() != truth.betas.nrows() || estimate.dim() != truth.betas.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "estimate is {}x{}, truth is {}x{}",
            estimate.n_tasks(),
            estimate.dim(),
            truth.betas.nrows(),
            truth.betas.ncols()
        )));
    }
    Ok(())
}

/// `‖B̂ − B̄‖_F / ‖B̄‖_F` over the stacked `m × d` coefficient matrices.
pub fn normalized_l2_error(estimate: &CoefficientSet, truth: &GroundTruth) -> Result<f64> {
    check_shapes(estimate, truth)?;
    let denom = truth.betas.norm();
    if denom == 0.0 {
        return Err(Error::InvalidConfig("normalized error is undefined for all-zero truth".into()));
    }
    Ok((estimate.to_matrix() - &truth.betas).norm() / denom)
}

/// Mean over tasks of `‖β̂ − β̄‖ / ‖β̄‖`, skipping tasks with zero truth.
pub fn normalized_l2_error_per_task(estimate: &CoefficientSet, truth: &GroundTruth) -> Result<f64> {
    check_shapes(estimate, truth)?;
    let mut total = 0.0;
    let mut count = 0;
    for (l, b) in estimate.betas().iter().enumerate() {
        let t = truth.betas.row(l).transpose();
        let denom = t.norm();
        if denom > 0.0 {
            total += (b - t).norm() / denom;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::InvalidConfig("normalized error is undefined for all-zero truth".into()));
    }
    Ok(total / count as f64)
}

/// Hamming distance between the thresholded joint support of `estimate` and
/// the shared true support.
pub fn hamming_support_distance(estimate: &CoefficientSet, truth: &GroundTruth) -> Result<usize> {
    check_shapes(estimate, truth)?;
    let d = estimate.dim();
    let mut selected = vec![false; d];
    for j in estimate.thresholded_support(SUPPORT_THRESHOLD) {
        selected[j] = true;
    }
    let mut actual = vec![false; d];
    for &j in &truth.shared_support {
        actual[j] = true;
    }
    Ok(selected.iter().zip(&actual).filter(|(a, b)| a != b).count())
}
