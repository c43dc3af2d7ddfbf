//! The weighted norm `‖f‖_{α,[a,b]}` and the constant `Λ_α(g)`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use super::derivative::quotient_integral;
use super::{shift_polynomial, FracOrder, PathFn, PiecewiseLinear};
use crate::error::{Error, Result};
use crate::quadrature::{graded, Grading, Integrator, PowerWeight, Rule};

/// Value of `‖f‖_{α,[a,b]}` with the quadrature that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub value: f64,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub mesh: String,
    /// Change in value between the last two refinements.
    pub error: f64,
}

/// Outer refinement schedule for piecewise-linear inputs (one graded rule per segment).
const SEGMENT_SCHEDULE: [Rule; 5] = [
    Rule::new(5, 4),
    Rule::new(8, 5),
    Rule::new(11, 6),
    Rule::new(14, 8),
    Rule::new(18, 10),
];
const REL_TOL: f64 = 1e-8;

/// `∫_a^b ( |f(s)|/(s−a)^α + ∫_a^s |f(s)−f(z)|/(s−z)^{1+α} dz ) ds`.
pub fn weighted_norm(f: &PathFn, order: FracOrder, a: f64, b: f64) -> Result<NormResult> {
    f.check_interval(a, b)?;
    let al = order.alpha();
    let (value, error, mesh) = match f {
        PathFn::Linear(p) => {
            let first = level_term_linear(p, a, b, al);
            let mut breaks = vec![a];
            breaks.extend(f.breakpoints(a, b));
            breaks.push(b);
            let mut prev: Option<f64> = None;
            let mut out = None;
            for rule in SEGMENT_SCHEDULE {
                let v: f64 = breaks
                    .windows(2)
                    .map(|w| {
                        graded(
                            |s| increment_term_linear(p, a, al, s),
                            w[0],
                            w[1],
                            PowerWeight::NONE,
                            Grading::Both,
                            rule,
                        )
                    })
                    .sum();
                if let Some(pv) = prev {
                    let err = (v - pv).abs();
                    if err <= REL_TOL * (v + first).abs().max(1e-300) {
                        out = Some((first + v, err, rule));
                        break;
                    }
                }
                prev = Some(v);
            }
            let (v, e, rule) = out.ok_or(Error::NonConvergence {
                estimate: first + prev.unwrap_or(f64::NAN),
                residual: f64::NAN,
            })?;
            let mesh = format!(
                "exact inner integrals on {} knots; outer graded rule ({} levels, order {}) per segment",
                p.knots().len(),
                rule.levels,
                rule.order
            );
            (v, e, mesh)
        }
        PathFn::Polynomial(c) => {
            let level = abs_power_integral(&shift_polynomial(c, a, 1.0), b - a, al);
            let increment = |s: f64| {
                // f(s) − f(z) = −Σ_{k≥1} d_k y^k with y = s − z.
                let d = shift_polynomial(c, s, -1.0);
                if d.len() < 2 {
                    0.0
                } else {
                    abs_power_integral(&d[1..], s - a, al)
                }
            };
            // The increment term has kinks where f' vanishes and where f(s) = f(a).
            let fa = f.eval(a);
            let mut knots = vec![a];
            knots.extend(sign_changes(|x| derivative(f, x, a, b), a, b));
            knots.extend(sign_changes(|x| f.eval(x) - fa, a, b));
            knots.push(b);
            knots.sort_by(f64::total_cmp);
            let (mut value, mut error) = (level, 0.0);
            for w in knots.windows(2) {
                let q = Integrator::new()
                    .tol(REL_TOL, 1e-14)
                    .integrate(increment, w[0], w[1])?;
                value += q.value;
                error += q.error;
            }
            (
                value,
                error,
                "closed-form inner integrals; adaptive outer rule split at critical points"
                    .to_string(),
            )
        }
        _ => {
            // |f| has kinks at the roots of f, the increment term where f' = 0 or f = f(a).
            let roots = sign_changes(|x| f.eval(x), a, b);
            let mut breaks = roots.clone();
            breaks.extend(sign_changes(|x| derivative(f, x, a, b), a, b));
            let fa = f.eval(a);
            breaks.extend(sign_changes(|x| f.eval(x) - fa, a, b));
            breaks.sort_by(f64::total_cmp);
            let pieces = |pts: &[f64]| -> Vec<(f64, f64)> {
                let mut knots = vec![a];
                knots.extend(pts.iter().copied().filter(|&x| x > a && x < b));
                knots.push(b);
                knots
                    .windows(2)
                    .map(|w| (w[0], w[1]))
                    .filter(|(u, v)| v > u)
                    .collect()
            };
            let (mut value, mut error) = (0.0, 0.0);
            for (k, (u, v)) in pieces(&roots).into_iter().enumerate() {
                let q = if k == 0 {
                    Integrator::new()
                        .weight(PowerWeight::left(-al))
                        .tol(1e-10, 1e-14)
                        .integrate(|s| f.eval(s).abs(), u, v)?
                } else {
                    Integrator::new().tol(1e-10, 1e-14).integrate(
                        |s| f.eval(s).abs() * (s - a).powf(-al),
                        u,
                        v,
                    )?
                };
                value += q.value;
                error += q.error;
            }
            let mut inner_err = None;
            for (u, v) in pieces(&breaks) {
                let q = Integrator::new().tol(REL_TOL, 1e-14).integrate(
                    |s| match increment_term_callable(f, a, al, s) {
                        Ok(v) => v,
                        Err(e) => {
                            inner_err = Some(e);
                            0.0
                        }
                    },
                    u,
                    v,
                )?;
                value += q.value;
                error += q.error;
            }
            if let Some(e) = inner_err {
                return Err(e);
            }
            (
                value,
                error,
                "nested adaptive graded quadrature split at kinks".to_string(),
            )
        }
    };
    if !value.is_finite() {
        return Err(Error::NonConvergence {
            estimate: value,
            residual: error,
        });
    }
    Ok(NormResult {
        value,
        a,
        b,
        alpha: al,
        mesh,
        error,
    })
}

/// `∫_a^b |f(s)| (s−a)^{−α} ds` in closed form: on a linear piece `c + m·y`,
/// `y = s − a`, the antiderivative is `c y^{1−α}/(1−α) + m y^{2−α}/(2−α)`.
fn level_term_linear(p: &PiecewiseLinear, a: f64, b: f64, al: f64) -> f64 {
    let prim = |c: f64, m: f64, y: f64| {
        c * y.powf(1.0 - al) / (1.0 - al) + m * y.powf(2.0 - al) / (2.0 - al)
    };
    let t = p.knots();
    let mut total = 0.0;
    let mut k = p.segment(a);
    while k + 1 < t.len() && t[k] < b {
        let (u1, u2) = (t[k].max(a), t[k + 1].min(b));
        if u2 > u1 {
            let m = p.slope(k);
            let c = p.line(k, a);
            total += abs_pieces(c, m, u1 - a, u2 - a, |y| prim(c, m, y));
        }
        k += 1;
    }
    total
}

/// `∫_{y1}^{y2} |c + m y| w(y) dy` given an antiderivative `prim` of `(c + m y) w(y)`.
fn abs_pieces<F: Fn(f64) -> f64>(c: f64, m: f64, y1: f64, y2: f64, prim: F) -> f64 {
    let root = if m != 0.0 { -c / m } else { f64::NAN };
    if root > y1 && root < y2 {
        (prim(root) - prim(y1)).abs() + (prim(y2) - prim(root)).abs()
    } else {
        (prim(y2) - prim(y1)).abs()
    }
}

/// `∫_a^s |f(s) − f(z)| (s−z)^{−1−α} dz` for a piecewise-linear `f`, exactly.
fn increment_term_linear(p: &PiecewiseLinear, a: f64, al: f64, s: f64) -> f64 {
    let t = p.knots();
    let fs = p.eval(s);
    let mut total = 0.0;
    let mut k = p.segment(a);
    while k + 1 < t.len() && t[k] < s {
        let (u1, u2) = (t[k].max(a), t[k + 1].min(s));
        if u2 > u1 {
            let m = p.slope(k);
            let (y1, y2) = (s - u2, s - u1);
            // f(s) − f(z) = c0 + m·y with y = s − z; c0 vanishes on the segment holding s.
            let c0 = if y1 > 0.0 { fs - p.line(k, s) } else { 0.0 };
            let prim = |y: f64| {
                let lead = if c0 != 0.0 {
                    -c0 * y.powf(-al) / al
                } else {
                    0.0
                };
                lead + m * y.powf(1.0 - al) / (1.0 - al)
            };
            total += abs_pieces(c0, m, y1, y2, prim);
        }
        k += 1;
    }
    total
}

/// `∫_0^len |Σ d_k y^k| y^{−α} dy`, exact between the sign changes of the polynomial.
fn abs_power_integral(d: &[f64], len: f64, al: f64) -> f64 {
    let poly = |y: f64| d.iter().rev().fold(0.0, |acc, dk| acc * y + dk);
    let prim = |y: f64| {
        d.iter()
            .enumerate()
            .map(|(k, dk)| dk * y.powf(k as f64 + 1.0 - al) / (k as f64 + 1.0 - al))
            .sum::<f64>()
    };
    let mut knots = vec![0.0];
    knots.extend(sign_changes(poly, 0.0, len));
    knots.push(len);
    knots
        .windows(2)
        .map(|w| (prim(w[1]) - prim(w[0])).abs())
        .sum()
}

/// Points in `(a, b)` where `h` changes sign: a scan of 256 cells refined by bisection.
fn sign_changes<F: Fn(f64) -> f64>(h: F, a: f64, b: f64) -> Vec<f64> {
    const CELLS: usize = 256;
    let x = |k: usize| a + (b - a) * k as f64 / CELLS as f64;
    let mut out = Vec::new();
    // Brackets run from the last nonzero sample, so exact zeros on the scan are kept.
    let (mut lo, mut hlo) = (a, h(a));
    for k in 1..=CELLS {
        let (hi, hhi) = (x(k), h(x(k)));
        if hhi == 0.0 {
            continue;
        }
        if hlo != 0.0 && (hlo < 0.0) != (hhi < 0.0) {
            let (mut l, mut r) = (lo, hi);
            for _ in 0..60 {
                let m = 0.5 * (l + r);
                if h(m) != 0.0 && (h(m) < 0.0) == (hlo < 0.0) {
                    l = m;
                } else {
                    r = m;
                }
            }
            out.push(0.5 * (l + r));
        }
        (lo, hlo) = (hi, hhi);
    }
    out
}

/// `f'(x)`: exact for polynomials, a central difference otherwise.
fn derivative(f: &PathFn, x: f64, a: f64, b: f64) -> f64 {
    match f {
        PathFn::Polynomial(c) => c
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (j, cj)| acc * x + j as f64 * cj),
        _ => {
            let h = 1e-6 * (b - a);
            let (l, r) = ((x - h).max(a), (x + h).min(b));
            (f.eval(r) - f.eval(l)) / (r - l)
        }
    }
}

fn increment_term_callable(f: &PathFn, a: f64, al: f64, s: f64) -> Result<f64> {
    if s <= a {
        return Ok(0.0);
    }
    let eval = |x: f64| f.eval(x);
    let len = s - a;
    let fs = f.eval(s);
    // |f(s) − f(z)| has kinks where f(z) = f(s); the graded rule handles only y → 0.
    let cuts: Vec<f64> = sign_changes(|y| fs - f.eval(s - y), 0.0, len)
        .into_iter()
        .filter(|&y| y > 1e-9 * len)
        .collect();
    let Some(&first) = cuts.first() else {
        return quotient_integral(&eval, s, len, -1.0, -al, true);
    };
    let mut total = quotient_integral(&eval, s, first, -1.0, -al, true)?;
    let mut knots = cuts;
    knots.push(len);
    for w in knots.windows(2) {
        total += Integrator::new()
            .tol(1e-10, 1e-14)
            .integrate(
                |y| (fs - f.eval(s - y)).abs() * y.powf(-1.0 - al),
                w[0],
                w[1],
            )?
            .value;
    }
    Ok(total)
}

/// `Λ_α(g)` over the knot pairs of a sampled path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaResult {
    /// Supremum over all knot pairs `s < t`.
    pub value: f64,
    /// Supremum over pairs of even-indexed knots only.
    pub coarse: f64,
    /// `|value − coarse|`, a measure of how far the supremum has stabilized.
    pub error: f64,
}

/// `sup_{s<t} |D^{1−α}_{t−} g_{t−}(s)|` over knot pairs. With
/// `Γ(α) D^{1−α}_{t−} g_{t−}(s) = −∫_s^t g'(u)(u−s)^{α−1} du`, the value for a
/// fixed `s` accumulates segment by segment as `t` moves right, so the sweep
/// costs `O(n²)`.
pub fn lambda_alpha(g: &PiecewiseLinear, order: FracOrder) -> LambdaResult {
    let al = order.alpha();
    let t = g.knots();
    let n = t.len();
    let norm = 1.0 / (al * gamma(al));
    let mut value: f64 = 0.0;
    let mut coarse: f64 = 0.0;
    for i in 0..n - 1 {
        let mut acc = 0.0;
        let mut lo = 0.0;
        for k in i..n - 1 {
            let hi = (t[k + 1] - t[i]).powf(al);
            acc += g.slope(k) * (hi - lo);
            lo = hi;
            let d = (acc * norm).abs();
            value = value.max(d);
            if i % 2 == 0 && (k + 1) % 2 == 0 {
                coarse = coarse.max(d);
            }
        }
    }
    LambdaResult {
        value,
        coarse,
        error: (value - coarse).abs(),
    }
}
