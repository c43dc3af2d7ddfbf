//! Riemann–Liouville derivatives `D^α_{a+} f` and `D^α_{b−} g_{b−}`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::{shift_polynomial, FracOrder, PathFn, PiecewiseLinear};
use crate::error::{domain, Error, Result};
use crate::quadrature::{graded, Grading, PowerWeight, Rule, SHALLOW_SCHEDULE};

/// Which derivative to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// `D^α_{a+} f`.
    Left,
    /// `D^α_{b−} g_{b−}` with `g_{b−}(x) = g(x) − g(b)`.
    Right,
}

/// Value at `x ∈ (a, b)` of the left derivative of `f` or the right derivative
/// of `f_{b−}`, both of order `order`.
pub fn rl_derivative(
    f: &PathFn,
    a: f64,
    b: f64,
    order: FracOrder,
    side: Side,
    x: f64,
) -> Result<f64> {
    f.check_interval(a, b)?;
    if !(x > a && x < b) {
        return Err(domain(format!(
            "derivative point {x} must lie inside ({a}, {b})"
        )));
    }
    let al = order.alpha();
    match side {
        Side::Left => left(f, a, al, x),
        Side::Right => right(f, b, al, x),
    }
}

pub(crate) fn left(f: &PathFn, a: f64, al: f64, x: f64) -> Result<f64> {
    Ok(match f {
        PathFn::Linear(p) => left_linear(p, a, al, x),
        PathFn::Polynomial(c) => power_series(&shift_polynomial(c, a, 1.0), al, x - a, 0),
        PathFn::Callable(g) => {
            let fx = g(x);
            let q = quotient_integral(&**g, x, x - a, -1.0, -al, false)?;
            (fx * (x - a).powf(-al) + al * q) / gamma(1.0 - al)
        }
    })
}

pub(crate) fn right(g: &PathFn, b: f64, be: f64, x: f64) -> Result<f64> {
    Ok(match g {
        PathFn::Linear(p) => right_linear(p, b, be, x),
        PathFn::Polynomial(c) => power_series(&shift_polynomial(c, b, -1.0), be, b - x, 1),
        PathFn::Callable(h) => {
            let gx = h(x);
            let q = quotient_integral(&**h, x, b - x, 1.0, -be, false)?;
            ((gx - h(b)) * (b - x).powf(-be) + be * q) / gamma(1.0 - be)
        }
    })
}

/// `∫_0^len q(y) y^e dy` with the difference quotient
/// `q(y) = (f(x) − f(x + dir·y)) / y` (or its absolute value).
///
/// The quotient uses the offset actually realized in floating point. The
/// refinement stays shallow because rounding noise in `q` grows like `ε/y`;
/// the one-point rule on the innermost cell is exact for linear `q`, so
/// shallow grading loses little. The absolute tolerance is scaled by the
/// size of the integrand, since the integral itself may nearly cancel.
pub(crate) fn quotient_integral(
    f: &(dyn Fn(f64) -> f64 + Send + Sync),
    x: f64,
    len: f64,
    dir: f64,
    e: f64,
    abs: bool,
) -> Result<f64> {
    let fx = f(x);
    let q = |y: f64| {
        let u = x + dir * y;
        let d = (u - x).abs();
        if d == 0.0 {
            return 0.0;
        }
        let v = (fx - f(u)) / d;
        if abs {
            v.abs()
        } else {
            v
        }
    };
    let size = [1.0, 0.5, 0.125]
        .iter()
        .map(|c| q(c * len).abs())
        .fold(0.0, f64::max);
    let scale = size * len.powf(1.0 + e) / (1.0 + e);
    // Stop grading where offsets fall below about 1e-7 of |x|.
    let depth = (len / (1e-7 * x.abs().max(len))).log2().floor().max(1.0) as usize;
    // Rounding floor of the quotient at the smallest offsets that are sampled.
    let y_min = 0.05 * len * 0.5f64.powi(depth as i32);
    let noise = 1e-15 * fx.abs().max(1.0) / y_min * len.powf(1.0 + e) / (1.0 + e);
    let mut prev: Option<f64> = None;
    let mut residual = f64::INFINITY;
    for rule in SHALLOW_SCHEDULE {
        let rule = Rule::new(rule.levels.min(depth), rule.order);
        let v = graded(q, 0.0, len, PowerWeight::left(e), Grading::Left, rule);
        if let Some(p) = prev {
            residual = (v - p).abs();
            if residual <= (1e-9 * v.abs()).max(1e-10 * scale).max(noise) {
                return Ok(v);
            }
        }
        prev = Some(v);
    }
    Err(Error::NonConvergence {
        estimate: prev.unwrap_or(f64::NAN),
        residual,
    })
}

/// Power rule `D^α y^k = Γ(k+1)/Γ(k+1−α) y^{k−α}` applied term by term from degree `from`.
fn power_series(d: &[f64], al: f64, y: f64, from: usize) -> f64 {
    let mut acc = 0.0;
    let mut fact = 1.0;
    for (k, dk) in d.iter().enumerate() {
        if k > 0 {
            fact *= k as f64;
        }
        if k >= from && *dk != 0.0 {
            acc += dk * fact / gamma(k as f64 + 1.0 - al) * y.powf(k as f64 - al);
        }
    }
    acc
}

/// Exact left derivative of a piecewise-linear function. Integrating by parts,
/// `Γ(1−α) D^α_{a+} f(x) = f(a)(x−a)^{−α} + ∫_a^x f'(u)(x−u)^{−α} du`, and `f'`
/// is constant on each segment.
pub(crate) fn left_linear(p: &PiecewiseLinear, a: f64, al: f64, x: f64) -> f64 {
    let t = p.knots();
    let e = 1.0 - al;
    let mut s = 0.0;
    let mut k = p.segment(a);
    let mut lo = (x - a).powf(e);
    while k + 1 < t.len() && t[k] < x {
        let u2 = t[k + 1].min(x);
        let hi = if u2 < x { (x - u2).powf(e) } else { 0.0 };
        s += p.slope(k) * (lo - hi);
        lo = hi;
        k += 1;
    }
    (p.eval(a) * (x - a).powf(-al) + s / e) / gamma(e)
}

/// Exact right derivative of `g_{b−}` for a piecewise-linear `g`:
/// `Γ(1−β) D^β_{b−} g_{b−}(x) = −∫_x^b g'(u)(u−x)^{−β} du`.
pub(crate) fn right_linear(p: &PiecewiseLinear, b: f64, be: f64, x: f64) -> f64 {
    let t = p.knots();
    let e = 1.0 - be;
    let mut s = 0.0;
    let mut k = p.segment(x);
    let mut lo = 0.0;
    while k + 1 < t.len() && t[k] < b {
        let u2 = t[k + 1].min(b);
        let hi = (u2 - x).powf(e);
        s += p.slope(k) * (hi - lo);
        lo = hi;
        k += 1;
    }
    -s / (e * gamma(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ord(a: f64) -> FracOrder {
        FracOrder::new(a).unwrap()
    }

    fn all_forms(coeffs: Vec<f64>) -> Vec<PathFn> {
        let c2 = coeffs.clone();
        let poly = PathFn::Polynomial(coeffs.clone());
        let call = PathFn::callable(move |x| c2.iter().rev().fold(0.0, |acc, c| acc * x + c));
        let mut v = vec![poly, call];
        if coeffs.len() <= 2 {
            let lin = PiecewiseLinear::sample(
                |x| PathFn::Polynomial(coeffs.clone()).eval(x),
                vec![0.0, 0.3, 0.55, 1.0, 2.0],
            )
            .unwrap();
            v.push(lin.into());
        }
        v
    }

    #[test]
    fn constant_left() {
        let expected = 1.0 / gamma(0.7);
        assert!((expected - 0.77038).abs() < 1e-5);
        for f in all_forms(vec![1.0]) {
            let d = rl_derivative(&f, 0.0, 2.0, ord(0.3), Side::Left, 1.0).unwrap();
            assert!((d - expected).abs() < 1e-9, "{f:?}: {d}");
        }
    }

    #[test]
    fn identity_left_power_rule() {
        let expected = 1.0 / gamma(1.7);
        assert!((expected - 1.10054).abs() < 1e-5);
        for f in all_forms(vec![0.0, 1.0]) {
            let d = rl_derivative(&f, 0.0, 2.0, ord(0.3), Side::Left, 1.0).unwrap();
            assert!((d - expected).abs() < 1e-9, "{f:?}: {d}");
        }
    }

    #[test]
    fn identity_right_of_increment() {
        // Order 1 − α with α = 1/2, evaluated at x = 0 for b = 1; the left end
        // only bounds the domain, so it is placed below 0.
        let expected = -2.0 / std::f64::consts::PI.sqrt();
        let lin =
            PiecewiseLinear::new(vec![-0.5, 0.0, 0.4, 1.0], vec![-0.5, 0.0, 0.4, 1.0]).unwrap();
        for g in [
            PathFn::Polynomial(vec![0.0, 1.0]),
            PathFn::callable(|x| x),
            lin.into(),
        ] {
            let d = rl_derivative(&g, -0.5, 1.0, ord(0.5), Side::Right, 0.0).unwrap();
            assert!((d - expected).abs() < 1e-9, "{g:?}: {d}");
        }
    }

    #[test]
    fn outside_point_is_rejected() {
        let f = PathFn::constant(1.0);
        assert!(rl_derivative(&f, 0.0, 1.0, ord(0.3), Side::Left, 1.0).is_err());
        let p: PathFn = PiecewiseLinear::new(vec![0.0, 1.0], vec![0.0, 1.0])
            .unwrap()
            .into();
        assert!(rl_derivative(&p, 0.0, 2.0, ord(0.3), Side::Left, 0.5).is_err());
    }

    #[test]
    fn cubic_forms_agree() {
        let c = vec![0.2, -0.7, 1.1, 0.4];
        let forms = all_forms(c.clone());
        let lin = PiecewiseLinear::sample(
            |x| forms[0].eval(x),
            (0..=4096).map(|k| k as f64 / 4096.0).collect(),
        )
        .unwrap()
        .into();
        for side in [Side::Left, Side::Right] {
            for x in [0.1, 0.5, 0.93] {
                let exact = rl_derivative(&forms[0], 0.0, 1.0, ord(0.35), side, x).unwrap();
                let quad = rl_derivative(&forms[1], 0.0, 1.0, ord(0.35), side, x).unwrap();
                let pl = rl_derivative(&lin, 0.0, 1.0, ord(0.35), side, x).unwrap();
                assert!(
                    (exact - quad).abs() < 1e-8,
                    "{side:?} {x}: {exact} vs {quad}"
                );
                assert!((exact - pl).abs() < 1e-4, "{side:?} {x}: {exact} vs {pl}");
            }
        }
    }

    proptest! {
        #[test]
        fn linear_in_the_function(c1 in -2.0f64..2.0, c2 in -2.0f64..2.0, x in 0.05f64..0.95) {
            let k = vec![0.0, 0.2, 0.45, 0.7, 1.0];
            let f1 = PiecewiseLinear::new(k.clone(), vec![0.1, -0.3, 0.8, 0.2, 0.5]).unwrap();
            let f2 = PiecewiseLinear::new(k.clone(), vec![1.0, 0.4, -0.6, 0.9, 0.0]).unwrap();
            let mix: Vec<f64> = f1.values().iter().zip(f2.values()).map(|(a, b)| c1 * a + c2 * b).collect();
            let f12 = PiecewiseLinear::new(k, mix).unwrap();
            for side in [Side::Left, Side::Right] {
                let d = |p: &PiecewiseLinear| rl_derivative(&p.clone().into(), 0.0, 1.0, ord(0.4), side, x).unwrap();
                let lhs = d(&f12);
                let rhs = c1 * d(&f1) + c2 * d(&f2);
                prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
            }
        }
    }
}
