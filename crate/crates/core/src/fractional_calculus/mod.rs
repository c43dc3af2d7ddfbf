//! Riemann–Liouville derivatives, the weighted norm `‖f‖_{α,[a,b]}`, the
//! constant `Λ_α(g)`, and the generalized Lebesgue–Stieltjes integral.
//!
//! Functions are either piecewise linear (sampled paths), polynomials, or
//! arbitrary callables. Piecewise-linear and polynomial inputs have exact
//! fractional derivatives; only the outer integrals need quadrature.
//! Callables go through graded quadrature with convergence control.

mod derivative;
mod integral;
mod norm;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::path_simulation::GaussianPath;

pub use derivative::{rl_derivative, Side};
pub use integral::{gls_integral, riemann_sum, verify_bound, BoundCheck};
pub use norm::{lambda_alpha, weighted_norm, LambdaResult, NormResult};

/// Order `α ∈ (0, 1)` of a fractional derivative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FracOrder(f64);

impl FracOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            Err(domain(format!(
                "fractional order must lie in (0, 1), got {alpha}"
            )))
        }
    }

    pub fn alpha(self) -> f64 {
        self.0
    }

    /// The complementary order `1 − α`.
    pub fn complement(self) -> Self {
        Self(1.0 - self.0)
    }

    /// Checks `α ∈ (1 − θ, 1/2)`, the window for integrating against a θ-Hölder function.
    pub fn check_pairing(self, theta: f64) -> Result<()> {
        if self.0 > 1.0 - theta && self.0 < 0.5 {
            Ok(())
        } else {
            Err(domain(format!(
                "alpha = {} is outside (1 - theta, 1/2) for theta = {theta}",
                self.0
            )))
        }
    }
}

impl TryFrom<f64> for FracOrder {
    type Error = Error;
    fn try_from(a: f64) -> Result<Self> {
        Self::new(a)
    }
}

impl From<FracOrder> for f64 {
    fn from(o: FracOrder) -> f64 {
        o.0
    }
}

/// Midpoint of `(1 − θ, 1/2)` for a θ-Hölder integrator, `θ ∈ (1/2, 1)`.
pub fn default_alpha(theta: f64) -> Result<FracOrder> {
    if !(theta > 0.5 && theta < 1.0) {
        return Err(domain(format!(
            "Hölder exponent must lie in (1/2, 1), got {theta}"
        )));
    }
    FracOrder::new(0.5 * (1.0 - theta + 0.5))
}

/// Continuous piecewise-linear interpolant through strictly increasing knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(Error::Grid(format!(
                "piecewise-linear function needs matching knots and values (at least 2), got {} and {}",
                knots.len(),
                values.len()
            )));
        }
        if knots.windows(2).any(|w| w[1] <= w[0] || !w[1].is_finite()) || !knots[0].is_finite() {
            return Err(Error::Grid(
                "knots must be finite and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(domain("piecewise-linear values must be finite"));
        }
        Ok(Self { knots, values })
    }

    /// Samples `f` at `knots`.
    pub fn sample<F: Fn(f64) -> f64>(f: F, knots: Vec<f64>) -> Result<Self> {
        let values = knots.iter().map(|&t| f(t)).collect();
        Self::new(knots, values)
    }

    pub fn from_path(path: &GaussianPath) -> Self {
        Self {
            knots: path.times().to_vec(),
            values: path.values.clone(),
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Index `k` of the segment `[t_k, t_{k+1}]` holding `x` (clamped to the range).
    pub fn segment(&self, x: f64) -> usize {
        self.knots
            .partition_point(|&t| t <= x)
            .saturating_sub(1)
            .min(self.knots.len() - 2)
    }

    pub fn slope(&self, k: usize) -> f64 {
        (self.values[k + 1] - self.values[k]) / (self.knots[k + 1] - self.knots[k])
    }

    /// Value of the line through segment `k`, extended to `x`.
    #[inline]
    pub fn line(&self, k: usize, x: f64) -> f64 {
        self.values[k] + self.slope(k) * (x - self.knots[k])
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.segment(x);
        if x == self.knots[k + 1] {
            return self.values[k + 1];
        }
        self.line(k, x)
    }
}

/// A real function on an interval, in one of the supported representations.
#[derive(Clone)]
pub enum PathFn {
    Linear(PiecewiseLinear),
    /// `Σ c_k x^k`, coefficients in increasing degree.
    Polynomial(Vec<f64>),
    Callable(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for PathFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathFn::Linear(p) => write!(f, "Linear({} knots)", p.knots.len()),
            PathFn::Polynomial(c) => write!(f, "Polynomial({c:?})"),
            PathFn::Callable(_) => f.write_str("Callable"),
        }
    }
}

impl From<PiecewiseLinear> for PathFn {
    fn from(p: PiecewiseLinear) -> Self {
        PathFn::Linear(p)
    }
}

impl From<&GaussianPath> for PathFn {
    fn from(p: &GaussianPath) -> Self {
        PathFn::Linear(PiecewiseLinear::from_path(p))
    }
}

impl PathFn {
    pub fn callable<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        PathFn::Callable(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        PathFn::Polynomial(vec![c])
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            PathFn::Linear(p) => p.eval(x),
            PathFn::Polynomial(c) => c.iter().rev().fold(0.0, |acc, ck| acc * x + ck),
            PathFn::Callable(f) => f(x),
        }
    }

    /// Knots strictly inside `(a, b)`, where the function may have kinks.
    pub(crate) fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        match self {
            PathFn::Linear(p) => p
                .knots
                .iter()
                .copied()
                .filter(|&t| t > a && t < b)
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Rejects intervals outside the knot range of a sampled function.
    pub(crate) fn check_interval(&self, a: f64, b: f64) -> Result<()> {
        if !(a < b && a.is_finite() && b.is_finite()) {
            return Err(domain(format!("invalid interval [{a}, {b}]")));
        }
        if let PathFn::Linear(p) = self {
            let (lo, hi) = (p.knots[0], p.knots[p.knots.len() - 1]);
            let tol = 1e-12 * (hi - lo);
            if a < lo - tol || b > hi + tol {
                return Err(domain(format!(
                    "interval [{a}, {b}] leaves the sampled range [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// Coefficients of `Σ c_j x^j` in the basis `(s·(x − c))^k`, i.e. the Taylor
/// coefficients around `c` with the sign `s = ±1` folded in.
pub(crate) fn shift_polynomial(coeffs: &[f64], c: f64, sign: f64) -> Vec<f64> {
    let n = coeffs.len();
    let mut out = vec![0.0; n];
    for (j, &cj) in coeffs.iter().enumerate() {
        let mut binom = 1.0;
        for (k, o) in out.iter_mut().enumerate().take(j + 1) {
            *o += cj * binom * c.powi((j - k) as i32) * sign.powi(k as i32);
            binom = binom * (j - k) as f64 / (k + 1) as f64;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_validation() {
        assert!(FracOrder::new(0.0).is_err());
        assert!(FracOrder::new(1.0).is_err());
        let a = FracOrder::new(0.3).unwrap();
        assert_eq!(a.complement().alpha(), 0.7);
        assert!(a.check_pairing(0.8).is_ok());
        assert!(a.check_pairing(0.6).is_err());
        assert!((default_alpha(0.7).unwrap().alpha() - 0.4).abs() < 1e-15);
        assert!(default_alpha(0.4).is_err());
    }

    #[test]
    fn piecewise_linear_eval() {
        let p = PiecewiseLinear::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 1.0]).unwrap();
        assert_eq!(p.eval(0.5), 1.0);
        assert_eq!(p.eval(1.0), 2.0);
        assert_eq!(p.eval(2.0), 1.5);
        assert_eq!(p.eval(3.0), 1.0);
        assert!(PiecewiseLinear::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn polynomial_shift_matches_direct_evaluation() {
        let c = vec![0.3, -1.0, 2.0, 0.5];
        let f = PathFn::Polynomial(c.clone());
        for (center, sign) in [(0.4, 1.0), (1.0, -1.0)] {
            let d = shift_polynomial(&c, center, sign);
            for x in [0.0, 0.2, 0.9, 1.3] {
                let y: f64 = d
                    .iter()
                    .enumerate()
                    .map(|(k, dk)| dk * (sign * (x - center)).powi(k as i32))
                    .sum();
                assert!((y - f.eval(x)).abs() < 1e-13);
            }
        }
    }
}
