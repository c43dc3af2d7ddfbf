//! Fractional Black–Scholes market `Y(t) = exp{(μ−r)t + σB^H(t)}`: constants
//! of its hidden semimartingale structure, the induced measure change, and the
//! divergence of the prelimit approximation.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{domain, Result};
use crate::martingale_tools::ThetaProcess;
use crate::process_models::fbm_star_kernel;
use crate::quadrature::{Grading, Integrator, PowerWeight};

fn check_h(h: f64) -> Result<()> {
    if h > 0.5 && h < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("H must lie in (1/2, 1), got {h}")))
    }
}

/// `C₁(H)` and `C₂(H) = C₁(H)(3/2 − H)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HiddenConstants {
    pub c1: f64,
    pub c2: f64,
}

/// `C₁(H) = (3/2−H)^{−1} (Γ(3/2−H) / (2H Γ(2−2H) Γ(H+½)))^{1/2}`.
pub fn hidden_semimartingale_constants(h: f64) -> Result<HiddenConstants> {
    check_h(h)?;
    let a = 1.5 - h;
    let c1 = (gamma(a) / (2.0 * h * gamma(2.0 - 2.0 * h) * gamma(h + 0.5))).sqrt() / a;
    Ok(HiddenConstants { c1, c2: c1 * a })
}

/// `∫_0^t s^{½−H} K*(t,s) ds` by quadrature; it scales as `t^{3/2−H}`.
pub fn kernel_drift_integral(h: f64, t: f64) -> Result<f64> {
    check_h(h)?;
    if !(t > 0.0) {
        return Err(domain(format!("t must be positive, got {t}")));
    }
    // K*(t,s) ~ (t−s)^{½−H} near s = t; both endpoint factors go to the weight.
    let q = Integrator::new()
        .weight(PowerWeight {
            left: 0.5 - h,
            right: 0.5 - h,
        })
        .tol(1e-7, 1e-12)
        .integrate(
            |s: f64| fbm_star_kernel(h, t, s).unwrap_or(f64::NAN) * (t - s).powf(h - 0.5),
            0.0,
            t,
        )?;
    Ok(q.value)
}

/// Market parameters of the fractional Black–Scholes example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Example42 {
    pub h: f64,
    pub mu: f64,
    pub r_rate: f64,
    pub sigma: f64,
}

impl Example42 {
    pub fn new(h: f64, mu: f64, r_rate: f64, sigma: f64) -> Result<Self> {
        check_h(h)?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(domain(format!("volatility must be positive, got {sigma}")));
        }
        if !(mu.is_finite() && r_rate.is_finite()) {
            return Err(domain("drift and rate must be finite"));
        }
        Ok(Self {
            h,
            mu,
            r_rate,
            sigma,
        })
    }

    /// Coefficient of `s^{½−H}` in `ς`.
    pub fn drift_coefficient(&self) -> f64 {
        let c2 = hidden_semimartingale_constants(self.h)
            .map(|c| c.c2)
            .unwrap_or(f64::NAN);
        (self.mu - self.r_rate) * c2 / self.sigma
    }

    /// `ς(s) = ((μ−r)C₂(H)/σ) s^{½−H} + σ/2`.
    pub fn varsigma(&self, s: f64) -> f64 {
        self.drift_coefficient() * s.powf(0.5 - self.h) + 0.5 * self.sigma
    }

    /// Largest admissible moment order is `1/(2H−1)`; use the midpoint with 1.
    pub fn moment_order(&self) -> f64 {
        if self.mu == self.r_rate {
            f64::INFINITY
        } else {
            0.5 * (1.0 + 1.0 / (2.0 * self.h - 1.0))
        }
    }

    /// `ϑ = −ς`, averaged over each grid cell since `s^{½−H}` is singular at 0.
    pub fn theta(&self) -> Result<ThetaProcess> {
        let (a, b, e) = (self.drift_coefficient(), 0.5 * self.sigma, 1.5 - self.h);
        if a == 0.0 {
            return Ok(ThetaProcess::constant(-b));
        }
        ThetaProcess::new(
            format!("varsigma(H = {})", self.h),
            self.moment_order(),
            move |i, t, _| {
                let mean = (t[i + 1].powf(e) - t[i].powf(e)) / (e * (t[i + 1] - t[i]));
                -(a * mean + b)
            },
        )
    }

    /// `∫_0^T |ς(s)|^{2p} ds`; an error when `(H−½)·2p ≥ 1`.
    pub fn moment(&self, p: f64, horizon: f64) -> Result<f64> {
        if !(p > 0.0 && horizon > 0.0) {
            return Err(domain(format!(
                "need p > 0 and T > 0, got p = {p}, T = {horizon}"
            )));
        }
        let a = self.drift_coefficient();
        if a == 0.0 {
            return Ok((0.5 * self.sigma).powf(2.0 * p) * horizon);
        }
        let k = self.h - 0.5;
        if k * 2.0 * p >= 1.0 {
            return Err(domain(format!(
                "∫|ς|^(2p) diverges: (H − 1/2)·2p = {} ≥ 1",
                k * 2.0 * p
            )));
        }
        // s = x^{1/k} turns ς into (a + bx)/x with the power x^{1/k−1−2p} as weight.
        let b = 0.5 * self.sigma;
        let q = Integrator::new()
            .weight(PowerWeight::left(1.0 / k - 1.0 - 2.0 * p))
            .grading(Grading::Left)
            .tol(1e-10, 1e-14)
            .integrate(
                |x: f64| (a + b * x).abs().powf(2.0 * p) / k,
                0.0,
                horizon.powf(k),
            )?;
        Ok(q.value)
    }
}

/// `ϑ = −ς` of the measure change reducing the virtual asset to a martingale.
pub fn example42_theta(h: f64, mu: f64, r_rate: f64, sigma: f64) -> Result<ThetaProcess> {
    Example42::new(h, mu, r_rate, sigma)?.theta()
}

/// Variance of the prelimit process with the two closed-form comparison values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrelimitVariance {
    /// `∫_0^t (∂₁K(t+ε,u) / K(t+ε,t))² du` by quadrature.
    pub quadrature: f64,
    /// `ε^{1−2H} t/(2−2H) (ε^{2H−2} − (t+ε)^{2H−2})`.
    pub stated_bound: f64,
    /// `(H−½)² ε^{1−2H}/(2−2H) (ε^{2H−2} − (t+ε)^{2H−2})`, from `J ≤ (t+ε)^{H−½}ε^{H−½}/(H−½)`.
    pub rigorous_bound: f64,
}

impl PrelimitVariance {
    pub fn meets_stated_bound(&self) -> bool {
        self.quadrature >= self.stated_bound
    }
}

/// Variance of `ζ_ε(t)`. The constant `C(H)` cancels in the ratio.
pub fn prelimit_variance(h: f64, eps: f64, t: f64) -> Result<PrelimitVariance> {
    check_h(h)?;
    if !(eps > 0.0 && t > 0.0 && eps.is_finite() && t.is_finite()) {
        return Err(domain(format!(
            "need eps > 0 and t > 0, got eps = {eps}, t = {t}"
        )));
    }
    let big = t + eps;
    // K(t+ε, t) / C(H) = t^{½−H} J with J = ∫_t^{t+ε} v^{H−½}(v−t)^{H−3/2} dv.
    let j = Integrator::new()
        .weight(PowerWeight::left(h - 1.5))
        .tol(1e-12, 0.0)
        .integrate_two_scale(|v: f64| v.powf(h - 0.5), t, big)?
        .value;
    let denom = t.powf(0.5 - h) * j;
    // ∂₁K(t+ε,u) / C(H) = u^{½−H}(t+ε)^{H−½}(t+ε−u)^{H−3/2}; its square carries u^{1−2H}.
    let scale = big.powf(h - 0.5) / denom;
    let q = Integrator::new()
        .weight(PowerWeight::left(1.0 - 2.0 * h))
        .grading(Grading::Left)
        .tol(1e-10, 1e-14)
        .integrate(|u: f64| (scale * (big - u).powf(h - 1.5)).powi(2), 0.0, t)?;
    let diff = eps.powf(2.0 * h - 2.0) - big.powf(2.0 * h - 2.0);
    let base = eps.powf(1.0 - 2.0 * h) * diff / (2.0 - 2.0 * h);
    Ok(PrelimitVariance {
        quadrature: q.value,
        stated_bound: t * base,
        rigorous_bound: (h - 0.5).powi(2) * base,
    })
}
