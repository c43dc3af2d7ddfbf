//! The Volterra kernel of fractional Brownian motion with respect to its
//! driving Wiener process, and the kernel of the inverse representation.

use statrs::function::beta::{beta, beta_reg};
use statrs::function::gamma::gamma;

use crate::error::{domain, Error, Result};
use crate::quadrature::{two_scale, Grading, Integrator, PowerWeight, Rule};

/// Rule used where a fixed, cheap but accurate kernel evaluation is needed.
const FAST_RULE: Rule = Rule::new(20, 10);

/// `K^H(t,s) = C(H) s^{1/2−H} ∫_s^t u^{H−1/2}(u−s)^{H−3/2} du` for `H ∈ (1/2, 1)`.
///
/// The constant `C(H)` is fixed by calibration: it is chosen so that
/// `∫_0^1 K^H(1,u)² du = 1`, i.e. so that the kernel reproduces the unit
/// variance of fractional Brownian motion at time one.
#[derive(Debug, Clone, Copy)]
pub struct FbmKernel {
    h: f64,
    c: f64,
}

fn check_h(h: f64) -> Result<()> {
    if h > 0.5 && h < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("kernel requires H in (1/2, 1), got {h}")))
    }
}

/// `∫_s^t u^{H−1/2}(u−s)^{H−3/2} du` with a fixed graded rule.
#[inline]
fn raw_integral(h: f64, t: f64, s: f64, rule: Rule) -> f64 {
    two_scale(|u: f64| u.powf(h - 0.5), s, t, h - 1.5, rule)
}

impl FbmKernel {
    /// Calibrates the normalizing constant for index `h`.
    pub fn new(h: f64) -> Result<Self> {
        check_h(h)?;
        // ∫_0^1 u^{1−2H} I(u)² du with I(u) = ∫_u^1 v^{H−1/2}(v−u)^{H−3/2} dv.
        // Near u = 1, I(u) ~ (1−u)^{H−1/2}/(H−1/2), so the squared kernel carries
        // the weight (1−u)^{2H−1}; it is divided out of the integrand and supplied
        // to the rule as an explicit endpoint weight.
        let inner_rule = Rule::new(40, 20);
        let q = Integrator::new()
            .weight(PowerWeight {
                left: 1.0 - 2.0 * h,
                right: 2.0 * h - 1.0,
            })
            .tol(1e-12, 1e-15)
            .integrate(
                |u: f64| {
                    let i = raw_integral(h, 1.0, u, inner_rule);
                    i * i * (1.0 - u).powf(1.0 - 2.0 * h)
                },
                0.0,
                1.0,
            )?;
        Ok(Self {
            h,
            c: 1.0 / q.value.sqrt(),
        })
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Calibrated normalizing constant `C(H)`.
    pub fn constant(&self) -> f64 {
        self.c
    }

    /// `K^H(t,s)` with adaptive quadrature (relative tolerance 1e−10).
    pub fn eval(&self, t: f64, s: f64) -> Result<f64> {
        if s < 0.0 || t < 0.0 {
            return Err(domain(format!(
                "kernel arguments must be nonnegative, got ({t}, {s})"
            )));
        }
        if s >= t {
            return Ok(0.0);
        }
        if s == 0.0 {
            return Err(domain("K^H(t, 0) is singular"));
        }
        let h = self.h;
        let q = Integrator::new()
            .weight(PowerWeight::left(h - 1.5))
            .tol(1e-10, 0.0)
            .integrate_two_scale(|u: f64| u.powf(h - 0.5), s, t)?;
        Ok(self.c * s.powf(0.5 - h) * q.value)
    }

    /// `K^H(t,s)` with a fixed rule; zero for `s ≥ t` or `s ≤ 0`.
    pub fn eval_fast(&self, t: f64, s: f64) -> f64 {
        if s >= t || s <= 0.0 {
            return 0.0;
        }
        self.c * s.powf(0.5 - self.h) * raw_integral(self.h, t, s, FAST_RULE)
    }

    /// `Cov(B^H(t), W(s)) = ∫_0^{s∧t} K^H(t,u) du`.
    ///
    /// Exchanging the order of integration turns the inner integral into a
    /// regularized incomplete beta function, leaving a one-dimensional integral.
    pub fn cov_with_wiener(&self, t: f64, s: f64) -> Result<f64> {
        let s = s.min(t);
        if s <= 0.0 {
            return Ok(0.0);
        }
        let h = self.h;
        let (a, b) = (1.5 - h, h - 0.5);
        let head = s.powf(h + 0.5) / (h + 0.5);
        let tail = if t > s {
            Integrator::new()
                .grading(Grading::Left)
                .tol(1e-12, 1e-16)
                .integrate(
                    |v: f64| v.powf(h - 0.5) * beta_reg(a, b, (s / v).min(1.0)),
                    s,
                    t,
                )?
                .value
        } else {
            0.0
        };
        Ok(self.c * beta(a, b) * (head + tail))
    }

    /// `∫_0^{s∧t} K^H(t,u) u^{1/2−H} du`, the projection of the kernel on the
    /// singular factor that dominates it near `u = 0`.
    pub fn singular_moment(&self, t: f64, s: f64) -> Result<f64> {
        let s = s.min(t);
        if s <= 0.0 {
            return Ok(0.0);
        }
        let h = self.h;
        let (a, b) = (2.0 - 2.0 * h, h - 0.5);
        let tail = if t > s {
            Integrator::new()
                .grading(Grading::Left)
                .tol(1e-12, 1e-16)
                .integrate(|v: f64| beta_reg(a, b, (s / v).min(1.0)), s, t)?
                .value
        } else {
            0.0
        };
        Ok(self.c * beta(a, b) * (s + tail))
    }
}

/// `K^H(t,s)`; calibrates the constant on every call, so prefer [`FbmKernel`]
/// for repeated evaluation.
pub fn fbm_kernel(h: f64, t: f64, s: f64) -> Result<f64> {
    FbmKernel::new(h)?.eval(t, s)
}

/// Kernel of the representation of the driving Wiener process through `B^H`:
/// `K*(t,s) = [t^{H−1/2}(t−s)^{1/2−H} − (H−1/2)∫_s^t u^{H−3/2}(u−s)^{1/2−H} du] / Γ(3/2−H)`.
pub fn fbm_star_kernel(h: f64, t: f64, s: f64) -> Result<f64> {
    check_h(h)?;
    if s >= t {
        return Ok(0.0);
    }
    if s <= 0.0 {
        return Err(domain("K*(t, s) requires s > 0"));
    }
    let q = Integrator::new()
        .weight(PowerWeight::left(0.5 - h))
        .tol(1e-11, 0.0)
        .integrate_two_scale(|u: f64| u.powf(h - 1.5), s, t)?;
    let bracket = t.powf(h - 0.5) * (t - s).powf(0.5 - h) - (h - 0.5) * q.value;
    let v = bracket / gamma(1.5 - h);
    if !v.is_finite() {
        return Err(Error::NonConvergence {
            estimate: v,
            residual: q.error,
        });
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process_models::fbm_cov;

    fn closed_form_constant(h: f64) -> f64 {
        (h * (2.0 * h - 1.0) / beta(2.0 - 2.0 * h, h - 0.5)).sqrt()
    }

    #[test]
    fn calibration_matches_closed_form() {
        for h in [0.55, 0.6, 0.7, 0.75, 0.8, 0.9, 0.95] {
            let k = FbmKernel::new(h).unwrap();
            let c = closed_form_constant(h);
            assert!(
                (k.constant() - c).abs() < 1e-9 * c,
                "H={h}: {} vs {c}",
                k.constant()
            );
        }
    }

    #[test]
    fn diagonal_is_zero() {
        assert_eq!(fbm_kernel(0.7, 0.5, 0.5).unwrap(), 0.0);
        assert_eq!(fbm_star_kernel(0.7, 0.5, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn kernel_value_matches_substitution_oracle() {
        // Oracle: substitute u = s + (t−s) y^{1/(H−1/2)}, which removes the
        // endpoint singularity; then a plain composite Simpson rule suffices.
        let h = 0.7;
        let (t, s) = (1.0, 0.5);
        let p = 1.0 / (h - 0.5);
        let n = 20000;
        let g = |y: f64| (s + (t - s) * y.powf(p)).powf(h - 0.5);
        let mut acc = g(0.0) + g(1.0);
        for i in 1..n {
            let y = i as f64 / n as f64;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * g(y);
        }
        let integral = acc / (3.0 * n as f64) * (t - s).powf(h - 0.5) * p;
        let oracle = closed_form_constant(h) * s.powf(0.5 - h) * integral;
        let v = fbm_kernel(h, t, s).unwrap();
        assert!((v - oracle).abs() < 1e-6 * oracle, "{v} vs {oracle}");
    }

    #[test]
    fn kernel_reproduces_fbm_covariance() {
        let h = 0.7;
        let k = FbmKernel::new(h).unwrap();
        for (s, t) in [(0.3, 0.8), (0.5, 1.0), (1.0, 1.0), (0.2, 0.25)] {
            let q = Integrator::new()
                .weight(PowerWeight::left(1.0 - 2.0 * h))
                .tol(1e-8, 1e-14)
                .integrate(
                    |u: f64| k.eval_fast(t, u) * k.eval_fast(s, u) * u.powf(2.0 * h - 1.0),
                    0.0,
                    s,
                )
                .unwrap();
            let want = fbm_cov(h, s, t);
            assert!(
                (q.value - want).abs() < 1e-3 * want,
                "({s},{t}) {} vs {want}",
                q.value
            );
        }
    }

    #[test]
    fn fast_and_adaptive_agree() {
        let k = FbmKernel::new(0.8).unwrap();
        for (t, s) in [(1.0, 1e-6), (1.0, 0.999999), (0.3, 0.1), (2.0, 1.0)] {
            let a = k.eval(t, s).unwrap();
            let f = k.eval_fast(t, s);
            assert!((a - f).abs() < 1e-9 * a.abs(), "({t},{s}) {a} vs {f}");
        }
    }

    #[test]
    fn cov_with_wiener_matches_direct_quadrature() {
        let k = FbmKernel::new(0.7).unwrap();
        for (t, s) in [(1.0, 0.4), (1.0, 1.0), (0.6, 0.1), (0.6, 0.9)] {
            let s_eff = f64::min(s, t);
            let direct = Integrator::new()
                .weight(PowerWeight::left(0.5 - 0.7))
                .tol(1e-10, 1e-15)
                .integrate(|u: f64| k.eval_fast(t, u) * u.powf(0.7 - 0.5), 0.0, s_eff)
                .unwrap()
                .value;
            let v = k.cov_with_wiener(t, s).unwrap();
            assert!(
                (v - direct).abs() < 1e-8 * direct,
                "({t},{s}) {v} vs {direct}"
            );
        }
    }

    #[test]
    fn singular_moment_matches_direct_quadrature() {
        let h = 0.75;
        let k = FbmKernel::new(h).unwrap();
        for (t, s) in [(1.0, 0.25), (0.5, 0.5)] {
            let direct = Integrator::new()
                .weight(PowerWeight::left(1.0 - 2.0 * h))
                .tol(1e-10, 1e-15)
                .integrate(|u: f64| k.eval_fast(t, u) * u.powf(h - 0.5), 0.0, s)
                .unwrap()
                .value;
            let v = k.singular_moment(t, s).unwrap();
            assert!(
                (v - direct).abs() < 1e-8 * direct,
                "({t},{s}) {v} vs {direct}"
            );
        }
    }

    #[test]
    fn star_kernel_integral_closed_form() {
        // Γ(3/2−H) ∫_0^t s^{1/2−H} K*(t,s) ds = Γ(3/2−H)² t^{3/2−H} / ((3/2−H) Γ(2−2H)).
        let h = 0.75;
        let t = 1.0;
        let q = Integrator::new()
            .weight(PowerWeight {
                left: 0.5 - h,
                right: 0.5 - h,
            })
            .tol(1e-9, 1e-14)
            .integrate(
                |s: f64| fbm_star_kernel(h, t, s).unwrap() * (t - s).powf(h - 0.5),
                0.0,
                t,
            )
            .unwrap();
        let g = gamma(1.5 - h);
        let want = g / ((1.5 - h) * gamma(2.0 - 2.0 * h)) * t.powf(1.5 - h);
        assert!(
            (q.value - want).abs() < 1e-7 * want,
            "{} vs {want}",
            q.value
        );
    }
}
