//! The generalized Lebesgue–Stieltjes integral and the bound
//! `|∫_0^t f dg| ≤ Λ_α(g) ‖f‖_{α,t}`.

use std::cell::RefCell;

use serde::{Deserialize, Serialize};

use super::derivative::{left, right};
use super::{lambda_alpha, weighted_norm, FracOrder, PathFn, PiecewiseLinear};
use crate::error::{Error, Result};
use crate::quadrature::{graded, Grading, PowerWeight, Rule};

const OUTER_SCHEDULE: [Rule; 5] = [
    Rule::new(6, 4),
    Rule::new(9, 6),
    Rule::new(12, 8),
    Rule::new(16, 10),
    Rule::new(20, 12),
];
const REL_TOL: f64 = 1e-8;

/// `∫_a^b f dg` through fractional derivatives of orders `α` and `1 − α`.
///
/// With the derivatives written without the factor `(−1)^α`, the pairing
/// `∫ D^α_{a+} f · D^{1−α}_{b−} g_{b−}` equals `−∫ f dg`; the sign is restored
/// here so that `f ≡ 1` returns `g(b) − g(a)`.
///
/// The outer integral is split at the knots of both functions and each piece
/// is integrated with a graded rule at both ends; the first piece carries the
/// weight `(x − a)^{−α}`. Callable integrands are checked for a finite
/// weighted norm before integrating.
pub fn gls_integral(f: &PathFn, g: &PathFn, order: FracOrder, a: f64, b: f64) -> Result<f64> {
    f.check_interval(a, b)?;
    g.check_interval(a, b)?;
    if matches!(f, PathFn::Callable(_)) {
        weighted_norm(f, order, a, b)?;
    }
    let al = order.alpha();
    let mut breaks = vec![a];
    breaks.extend(f.breakpoints(a, b));
    breaks.extend(g.breakpoints(a, b));
    breaks.push(b);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let product = |x: f64| -> f64 {
        match left(f, a, al, x).and_then(|df| Ok(df * right(g, b, 1.0 - al, x)?)) {
            Ok(v) => v,
            Err(e) => {
                *failure.borrow_mut() = Some(e);
                0.0
            }
        }
    };
    let mut prev: Option<f64> = None;
    let mut last_err = f64::INFINITY;
    for rule in OUTER_SCHEDULE {
        let mut total = 0.0;
        let mut scale = 0.0;
        for (j, w) in breaks.windows(2).enumerate() {
            let piece = if j == 0 {
                graded(
                    |x| (x - a).powf(al) * product(x),
                    w[0],
                    w[1],
                    PowerWeight::left(-al),
                    Grading::Both,
                    rule,
                )
            } else {
                graded(product, w[0], w[1], PowerWeight::NONE, Grading::Both, rule)
            };
            total += piece;
            scale += piece.abs();
        }
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        if !total.is_finite() {
            return Err(Error::NonConvergence {
                estimate: total,
                residual: f64::NAN,
            });
        }
        if let Some(p) = prev {
            last_err = (total - p).abs();
            if last_err <= REL_TOL * scale.max(f64::MIN_POSITIVE) {
                return Ok(-total);
            }
        }
        prev = Some(total);
    }
    Err(Error::NonConvergence {
        estimate: -prev.unwrap_or(f64::NAN),
        residual: last_err,
    })
}

/// Left-point Riemann–Stieltjes sum `Σ f(t_k)(g(t_{k+1}) − g(t_k))` over `points`.
pub fn riemann_sum(f: &PathFn, g: &PathFn, points: &[f64]) -> f64 {
    points
        .windows(2)
        .map(|w| f.eval(w[0]) * (g.eval(w[1]) - g.eval(w[0])))
        .sum()
}

/// Both sides of the bound and whether it holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Relative slack allowed on the right-hand side for quadrature error.
const BOUND_TOL: f64 = 1e-6;

/// Compares `|∫_0^t f dg|` with `Λ_α(g) ‖f‖_{α,t}`, where `Λ_α` is taken over
/// the whole sampled range of `g` and `0` is its first knot.
pub fn verify_bound(
    f: &PathFn,
    g: &PiecewiseLinear,
    order: FracOrder,
    t: f64,
) -> Result<BoundCheck> {
    let start = g.knots()[0];
    let gf = PathFn::Linear(g.clone());
    let lhs = gls_integral(f, &gf, order, start, t)?.abs();
    let rhs = lambda_alpha(g, order).value * weighted_norm(f, order, start, t)?.value;
    Ok(BoundCheck {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + BOUND_TOL),
    })
}
