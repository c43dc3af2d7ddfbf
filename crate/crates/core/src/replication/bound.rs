//! Small-deviation bound for sums of squares of jointly Gaussian variables.

use nalgebra::DMatrix;

use crate::error::{domain, Result};

/// `P(Σ ξ_i² ≤ x) ≤ exp{−(Σ E ξ_i² − x)² / Σ_{ij} (E ξ_i ξ_j)²}` for centered
/// jointly Gaussian `ξ` with covariance `cov` and `0 < x < Σ E ξ_i²`.
pub fn small_deviation_bound(cov: &DMatrix<f64>, x: f64) -> Result<f64> {
    if !cov.is_square() || cov.nrows() == 0 {
        return Err(domain("covariance matrix must be square and nonempty"));
    }
    let total = cov.trace();
    if !(x > 0.0 && x < total) {
        return Err(domain(format!("x = {x} must lie in (0, {total})")));
    }
    let frob: f64 = cov.iter().map(|c| c * c).sum();
    Ok((-(total - x).powi(2) / frob).exp())
}
