//! Dyadic estimate of the pathwise Hölder exponent from quadratic variations.
//!
//! At scale `j` the path is cut into `n = 2^j` cells and `S_j` is the sum of
//! squared increments. For a path with local exponent `H`,
//! `S_j ≈ c n^{1−2H}`, so the slope of `log2 S_j` in `j` is `1 − 2H`. The
//! ratio is insensitive to a random local scale (as in `W²` or exponential
//! martingales), which biases estimates built on the largest increment.
//! `E log2(χ²_n/n) ≈ −1/(n ln 2)` is added back at each scale.

use serde::{Deserialize, Serialize};

use super::GaussianPath;
use crate::error::{Error, Result};
use crate::stats::linear_fit;

/// Point estimate with a 95% half-width from the regression.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderEstimate {
    pub exponent: f64,
    pub half_width: f64,
}

/// Regresses over scales `j_min..=j_max`; the path must sit on a uniform grid
/// of exactly `2^{j_max}` cells. The exponent is capped at 1 and a constant
/// path reports 1.
pub fn holder_exponent_estimate(
    path: &GaussianPath,
    j_min: u32,
    j_max: u32,
) -> Result<HolderEstimate> {
    let cells = path.values.len() - 1;
    if path.grid.uniform_step().is_none() || cells != 1usize << j_max {
        return Err(Error::Grid(format!(
            "Hölder estimate needs a uniform grid of 2^{j_max} cells, got {cells}"
        )));
    }
    if j_max < j_min + 3 {
        return Err(Error::Config(format!(
            "Hölder estimate needs at least 4 scales, got {j_min}..={j_max}"
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for j in j_min..=j_max {
        let n = 1usize << j;
        let stride = cells / n;
        let sq: f64 = (0..n)
            .map(|k| (path.values[(k + 1) * stride] - path.values[k * stride]).powi(2))
            .sum();
        if sq == 0.0 {
            return Ok(HolderEstimate {
                exponent: 1.0,
                half_width: 0.0,
            });
        }
        xs.push(j as f64);
        ys.push(sq.log2() + 1.0 / (n as f64 * std::f64::consts::LN_2));
    }
    let (slope, _, se) = linear_fit(&xs, &ys);
    Ok(HolderEstimate {
        exponent: ((1.0 - slope) / 2.0).min(1.0),
        half_width: 1.96 * se / 2.0,
    })
}
