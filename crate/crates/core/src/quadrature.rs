//! Gauss–Legendre rules and a geometrically graded composite rule for
//! integrands with algebraic endpoint singularities.
//!
//! The graded rule integrates `f(x) (x-a)^l (b-x)^r` over `[a, b]`. Each half
//! of the interval is cut into cells whose widths halve toward the endpoint.
//! The power weight is evaluated at the Gauss nodes of every cell except the
//! one touching a weighted endpoint, where the exact weight moment is paired
//! with `f` at the weight centroid (a one-point Gauss–Jacobi rule).

use std::sync::OnceLock;

use crate::error::{Error, Result};

const MAX_ORDER: usize = 128;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes an `n`-point rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    #[inline]
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Returns a cached Gauss–Legendre rule of order `n` (`1 ≤ n ≤ 128`).
pub fn gauss_legendre(n: usize) -> &'static GaussLegendre {
    static CACHE: [OnceLock<GaussLegendre>; MAX_ORDER + 1] =
        [const { OnceLock::new() }; MAX_ORDER + 1];
    assert!(
        (1..=MAX_ORDER).contains(&n),
        "unsupported Gauss-Legendre order {n}"
    );
    CACHE[n].get_or_init(|| GaussLegendre::new(n))
}

/// Algebraic endpoint weight `(x-a)^left (b-x)^right`; exponents must exceed −1.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerWeight {
    pub left: f64,
    pub right: f64,
}

impl PowerWeight {
    pub const NONE: PowerWeight = PowerWeight {
        left: 0.0,
        right: 0.0,
    };

    pub fn left(e: f64) -> Self {
        Self {
            left: e,
            right: 0.0,
        }
    }

    pub fn right(e: f64) -> Self {
        Self {
            left: 0.0,
            right: e,
        }
    }
}

/// Which ends of the interval receive geometric grading.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grading {
    None,
    Left,
    Right,
    Both,
}

impl Grading {
    fn left(self) -> bool {
        matches!(self, Grading::Left | Grading::Both)
    }
    fn right(self) -> bool {
        matches!(self, Grading::Right | Grading::Both)
    }
}

/// Resolution of one pass of the graded rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rule {
    /// Number of geometric cells per graded half.
    pub levels: usize,
    /// Gauss–Legendre order per cell.
    pub order: usize,
}

impl Rule {
    pub const fn new(levels: usize, order: usize) -> Self {
        Self { levels, order }
    }
}

/// One pass of the graded composite rule for `∫_a^b f(x) w(x) dx`.
///
/// Weights are evaluated from offsets to the endpoints rather than from `x`,
/// so cells narrower than the spacing of floating-point numbers near `a` or
/// `b` still receive the correct weight.
pub fn graded<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    weight: PowerWeight,
    grading: Grading,
    rule: Rule,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let gl = gauss_legendre(rule.order);
    let len = b - a;
    let half = 0.5 * len;
    let (wl, wr) = (weight.left, weight.right);
    let w = |y: f64, z: f64| -> f64 {
        let mut v = 1.0;
        if wl != 0.0 {
            v *= y.powf(wl);
        }
        if wr != 0.0 {
            v *= z.powf(wr);
        }
        v
    };
    let mut total = 0.0;

    // Left half, parametrized by the offset y = x − a.
    {
        let mut left = |y: f64| f(a + y) * w(y, len - y);
        if grading.left() || wl != 0.0 {
            let mut hi = half;
            for _ in 0..rule.levels {
                let lo = 0.5 * hi;
                total += gl.integrate(&mut left, lo, hi);
                hi = lo;
            }
            total += if wl != 0.0 {
                let yc = hi * (wl + 1.0) / (wl + 2.0);
                left(yc) / yc.powf(wl) * hi.powf(wl + 1.0) / (wl + 1.0)
            } else {
                gl.integrate(&mut left, 0.0, hi)
            };
        } else {
            total += uniform_cells(&mut left, 0.0, half, rule, gl);
        }
    }

    // Right half, parametrized by the offset z = b − x.
    let mut right = |z: f64| f(b - z) * w(len - z, z);
    if grading.right() || wr != 0.0 {
        let mut hi = half;
        for _ in 0..rule.levels {
            let lo = 0.5 * hi;
            total += gl.integrate(&mut right, lo, hi);
            hi = lo;
        }
        total += if wr != 0.0 {
            let zc = hi * (wr + 1.0) / (wr + 2.0);
            right(zc) / zc.powf(wr) * hi.powf(wr + 1.0) / (wr + 1.0)
        } else {
            gl.integrate(&mut right, 0.0, hi)
        };
    } else {
        total += uniform_cells(&mut right, 0.0, half, rule, gl);
    }
    total
}

fn uniform_cells<F: FnMut(f64) -> f64>(
    wf: &mut F,
    a: f64,
    b: f64,
    rule: Rule,
    gl: &GaussLegendre,
) -> f64 {
    let cells = (rule.levels / 4).max(2);
    let h = (b - a) / cells as f64;
    (0..cells)
        .map(|i| gl.integrate(&mut *wf, a + i as f64 * h, a + (i + 1) as f64 * h))
        .sum()
}

/// One pass for `∫_s^t f(u) (u−s)^e du` when `f` is itself singular at `u = 0`
/// and `0 < s ≪ t`. The piece `[s, 2s]` is graded toward `s`; beyond `2s` the
/// interval is cut into cells `[x, 2x]` that are geometric with respect to the
/// origin, so the number of cells adapts to `log₂(t/s)`.
pub fn two_scale<F: FnMut(f64) -> f64>(mut f: F, s: f64, t: f64, e: f64, rule: Rule) -> f64 {
    if t <= s {
        return 0.0;
    }
    let split = (2.0 * s).min(t);
    let mut total = graded(&mut f, s, split, PowerWeight::left(e), Grading::Left, rule);
    if split < t {
        let gl = gauss_legendre(rule.order);
        let mut g = |u: f64| f(u) * (u - s).powf(e);
        let mut lo = split;
        while lo < t {
            let hi = (2.0 * lo).min(t);
            total += gl.integrate(&mut g, lo, hi);
            lo = hi;
        }
    }
    total
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    /// Difference between the last two refinement passes.
    pub error: f64,
}

/// Refinement schedule used by [`Integrator`]: both levels and order grow.
pub const DEFAULT_SCHEDULE: [Rule; 5] = [
    Rule::new(16, 6),
    Rule::new(24, 10),
    Rule::new(32, 16),
    Rule::new(40, 24),
    Rule::new(48, 32),
];

/// Schedule for integrands evaluated through difference quotients, where cells
/// much narrower than about 1e-7 of the interval lose accuracy to cancellation.
pub const SHALLOW_SCHEDULE: [Rule; 4] = [
    Rule::new(10, 6),
    Rule::new(14, 10),
    Rule::new(18, 16),
    Rule::new(22, 24),
];

/// Adaptive driver: repeats [`graded`] on a refinement schedule until two
/// successive passes agree to `max(rel·|value|, abs)`.
#[derive(Debug, Clone, Copy)]
pub struct Integrator {
    pub weight: PowerWeight,
    pub grading: Grading,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub schedule: &'static [Rule],
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            weight: PowerWeight::NONE,
            grading: Grading::Both,
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            schedule: &DEFAULT_SCHEDULE,
        }
    }
}

impl Integrator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn weight(mut self, w: PowerWeight) -> Self {
        self.weight = w;
        self
    }

    pub fn grading(mut self, g: Grading) -> Self {
        self.grading = g;
        self
    }

    pub fn tol(mut self, rel: f64, abs: f64) -> Self {
        self.rel_tol = rel;
        self.abs_tol = abs;
        self
    }

    pub fn schedule(mut self, s: &'static [Rule]) -> Self {
        self.schedule = s;
        self
    }

    /// Adaptive version of [`two_scale`]; only `weight.left` is used.
    pub fn integrate_two_scale<F: FnMut(f64) -> f64>(
        &self,
        mut f: F,
        s: f64,
        t: f64,
    ) -> Result<Quad> {
        self.refine(|rule| two_scale(&mut f, s, t, self.weight.left, rule), s, t)
    }

    /// Integrates `f · weight` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F, a: f64, b: f64) -> Result<Quad> {
        self.refine(
            |rule| graded(&mut f, a, b, self.weight, self.grading, rule),
            a,
            b,
        )
    }

    fn refine<P: FnMut(Rule) -> f64>(&self, mut pass: P, a: f64, b: f64) -> Result<Quad> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::Domain(format!(
                "non-finite integration bounds [{a}, {b}]"
            )));
        }
        if b <= a {
            return Ok(Quad {
                value: 0.0,
                error: 0.0,
            });
        }
        let mut prev: Option<f64> = None;
        let mut last_err = f64::INFINITY;
        for rule in self.schedule {
            let v = pass(*rule);
            if !v.is_finite() {
                return Err(Error::NonConvergence {
                    estimate: v,
                    residual: f64::INFINITY,
                });
            }
            if let Some(p) = prev {
                last_err = (v - p).abs();
                if last_err <= (self.rel_tol * v.abs()).max(self.abs_tol) {
                    return Ok(Quad {
                        value: v,
                        error: last_err,
                    });
                }
            }
            prev = Some(v);
        }
        Err(Error::NonConvergence {
            estimate: prev.unwrap_or(f64::NAN),
            residual: last_err,
        })
    }
}
