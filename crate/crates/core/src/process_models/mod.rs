//! Covariance models of centered Gaussian processes, their kernels, and
//! numeric checks of the quasi-helix and increment-correlation conditions.

mod conditions;
mod kernels;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{domain, Result};
use crate::quadrature::{Grading, Integrator};

pub use conditions::{
    check_conditions, volterra_condition_check, B3Variant, CheckResult, ConditionReport,
    VolterraBounds, VolterraReport,
};
pub use kernels::{fbm_kernel, fbm_star_kernel, FbmKernel};

/// Kernel `K(t, s)` of a Volterra representation `∫_0^t K(t,s) dW(s)`.
pub type KernelFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Volterra-kernel process together with its declared regularity constants.
#[derive(Clone)]
pub struct VolterraSpec {
    pub name: String,
    pub kernel: KernelFn,
    pub h: f64,
    pub r: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl fmt::Debug for VolterraSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VolterraSpec")
            .field("name", &self.name)
            .field("h", &self.h)
            .field("r", &self.r)
            .field("d1", &self.d1)
            .field("d2", &self.d2)
            .field("d3", &self.d3)
            .finish()
    }
}

/// Process class and its parameters.
#[derive(Debug, Clone)]
pub enum Variant {
    /// Fractional Brownian motion with Hurst index `h`.
    FBm { h: f64 },
    /// Sub-fractional Brownian motion.
    SubFBm { h: f64 },
    /// Bifractional Brownian motion with indices `a` and `k`.
    BiFBm { a: f64, k: f64 },
    /// Fractional Ornstein–Uhlenbeck process `dY = aY dt + σ dB^H`, `Y(0) = y0`.
    FOu { h: f64, a: f64, y0: f64, sigma: f64 },
    /// `Σ a_i B^{H_i}` with independent components, given as `(a_i, H_i)`.
    LinearCombo(Vec<(f64, f64)>),
    /// Mixed process `W + B^H`.
    Mixed { h: f64 },
    /// Volterra process `∫_0^t K(t,s) dW(s)`.
    Volterra(VolterraSpec),
}

/// A Gaussian process model on `[0, T]`.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    pub variant: Variant,
    pub horizon: f64,
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} = {x} must lie in (0, 1)")))
    }
}

impl CovarianceModel {
    /// Builds a model after validating its parameters.
    pub fn new(variant: Variant, horizon: f64) -> Result<Self> {
        let m = Self { variant, horizon };
        m.validate()?;
        Ok(m)
    }

    pub fn fbm(h: f64, horizon: f64) -> Result<Self> {
        Self::new(Variant::FBm { h }, horizon)
    }

    /// Checks every parameter against its admissible range.
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(domain(format!(
                "horizon T = {} must be positive and finite",
                self.horizon
            )));
        }
        match &self.variant {
            Variant::FBm { h } | Variant::SubFBm { h } | Variant::Mixed { h } => {
                check_unit("H", *h)
            }
            Variant::BiFBm { a, k } => {
                check_unit("A", *a)?;
                if *k > 0.0 && *k <= 1.0 {
                    Ok(())
                } else {
                    Err(domain(format!("K = {k} must lie in (0, 1]")))
                }
            }
            Variant::FOu { h, a, y0, sigma } => {
                check_unit("H", *h)?;
                if !(a.is_finite() && y0.is_finite() && sigma.is_finite()) {
                    return Err(domain("fOU parameters must be finite"));
                }
                Ok(())
            }
            Variant::LinearCombo(terms) => {
                if terms.is_empty() {
                    return Err(domain("linear combination needs at least one term"));
                }
                for (w, h) in terms {
                    if !w.is_finite() {
                        return Err(domain(format!("weight {w} is not finite")));
                    }
                    check_unit("H_i", *h)?;
                }
                Ok(())
            }
            Variant::Volterra(v) => {
                if !(v.h > 0.5 && v.h < 1.0) {
                    return Err(domain(format!("Volterra H = {} must lie in (1/2, 1)", v.h)));
                }
                if !(v.r >= 0.0 && v.r < 0.5) {
                    return Err(domain(format!("Volterra r = {} must lie in [0, 1/2)", v.r)));
                }
                if !(v.d1 > 0.0 && v.d2 > 0.0 && v.d3 > 0.0) {
                    return Err(domain("Volterra constants D1, D2, D3 must be positive"));
                }
                Ok(())
            }
        }
    }

    /// Short name of the variant, used in diagnostics.
    pub fn name(&self) -> String {
        match &self.variant {
            Variant::FBm { h } => format!("fbm(H={h})"),
            Variant::SubFBm { h } => format!("subfbm(H={h})"),
            Variant::BiFBm { a, k } => format!("bifbm(A={a},K={k})"),
            Variant::FOu { h, a, .. } => format!("fou(H={h},a={a})"),
            Variant::LinearCombo(t) => format!("linear_combo({t:?})"),
            Variant::Mixed { h } => format!("mixed(H={h})"),
            Variant::Volterra(v) => format!("volterra({})", v.name),
        }
    }

    /// True for processes with stationary increments and a closed-form
    /// incremental variance (eligible for circulant sampling when fBm).
    pub fn is_fbm(&self) -> Option<f64> {
        match self.variant {
            Variant::FBm { h } => Some(h),
            _ => None,
        }
    }

    /// Deterministic mean `E G(t)`; nonzero only for the fOU start value.
    pub fn mean(&self, t: f64) -> f64 {
        match self.variant {
            Variant::FOu { a, y0, .. } => y0 * (a * t).exp(),
            _ => 0.0,
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.horizon;
        if t >= -slack && t <= self.horizon + slack {
            Ok(())
        } else {
            Err(domain(format!("time {t} outside [0, {}]", self.horizon)))
        }
    }

    /// Covariance `Cov(G(s), G(t))` of the centered part of the process.
    pub fn covariance(&self, s: f64, t: f64) -> Result<f64> {
        self.check_time(s)?;
        self.check_time(t)?;
        let (s, t) = if s <= t {
            (s.max(0.0), t)
        } else {
            (t.max(0.0), s)
        };
        Ok(match &self.variant {
            Variant::FBm { h } => fbm_cov(*h, s, t),
            Variant::SubFBm { h } => {
                let e = 2.0 * h;
                s.powf(e) + t.powf(e) - 0.5 * ((s + t).powf(e) + (t - s).powf(e))
            }
            Variant::BiFBm { a, k } => {
                let e = 2.0 * a;
                2f64.powf(-k) * ((s.powf(e) + t.powf(e)).powf(*k) - (t - s).powf(e * k))
            }
            Variant::LinearCombo(terms) => {
                terms.iter().map(|(w, h)| w * w * fbm_cov(*h, s, t)).sum()
            }
            Variant::Mixed { h } => fbm_cov(0.5, s, t) + fbm_cov(*h, s, t),
            Variant::FOu { h, a, sigma, .. } => sigma * sigma * fou_cov(*h, *a, s, t)?,
            Variant::Volterra(v) => volterra_cov(&v.kernel, s, t)?,
        })
    }

    /// `E|G(t) − G(s)|²`.
    pub fn incremental_variance(&self, s: f64, t: f64) -> Result<f64> {
        self.check_time(s)?;
        self.check_time(t)?;
        let d = (t - s).abs();
        match &self.variant {
            Variant::FBm { h } => Ok(d.powf(2.0 * h)),
            Variant::LinearCombo(terms) => {
                Ok(terms.iter().map(|(w, h)| w * w * d.powf(2.0 * h)).sum())
            }
            Variant::Mixed { h } => Ok(d + d.powf(2.0 * h)),
            _ => Ok(self.covariance(t, t)? - 2.0 * self.covariance(s, t)? + self.covariance(s, s)?),
        }
    }

    /// `Cov(G(b1) − G(a1), G(b2) − G(a2))`. Stationary-increment variants use
    /// the closed form in the gaps, which keeps small increments accurate.
    pub fn increment_covariance(&self, a1: f64, b1: f64, a2: f64, b2: f64) -> Result<f64> {
        let stationary = |h: f64| {
            let e = 2.0 * h;
            0.5 * ((b1 - a2).abs().powf(e) + (a1 - b2).abs().powf(e)
                - (b1 - b2).abs().powf(e)
                - (a1 - a2).abs().powf(e))
        };
        for t in [a1, b1, a2, b2] {
            self.check_time(t)?;
        }
        Ok(match &self.variant {
            Variant::FBm { h } => stationary(*h),
            Variant::LinearCombo(terms) => terms.iter().map(|(w, h)| w * w * stationary(*h)).sum(),
            Variant::Mixed { h } => stationary(0.5) + stationary(*h),
            _ => {
                self.covariance(b1, b2)? - self.covariance(b1, a2)? - self.covariance(a1, b2)?
                    + self.covariance(a1, a2)?
            }
        })
    }

    /// Covariance matrix on `times`.
    pub fn covariance_matrix(&self, times: &[f64]) -> Result<DMatrix<f64>> {
        let n = times.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let c = self.covariance(times[i], times[j])?;
                m[(i, j)] = c;
                m[(j, i)] = c;
            }
        }
        Ok(m)
    }
}

#[inline]
pub(crate) fn fbm_cov(h: f64, s: f64, t: f64) -> f64 {
    let e = 2.0 * h;
    0.5 * (s.powf(e) + t.powf(e) - (t - s).abs().powf(e))
}

/// `Cov(X_s, X_t)` for `X_t = ∫_0^t e^{a(t−u)} dB^H(u) = B_t + a∫_0^t e^{a(t−u)} B_u du`.
fn fou_cov(h: f64, a: f64, s: f64, t: f64) -> Result<f64> {
    if a == 0.0 {
        return Ok(fbm_cov(h, s, t));
    }
    let inner_q = Integrator::new().tol(1e-11, 1e-15);
    // J(u) = ∫_0^t e^{a(t−v)} R(u, v) dv, split at the kink v = u.
    let inner = |u: f64| -> Result<f64> {
        let f = |v: f64| (a * (t - v)).exp() * fbm_cov(h, u, v);
        if u > 0.0 && u < t {
            Ok(inner_q.integrate(f, 0.0, u)?.value + inner_q.integrate(f, u, t)?.value)
        } else {
            Ok(inner_q.integrate(f, 0.0, t)?.value)
        }
    };
    let j_s = inner(s)?;
    let mut err = None;
    let outer = Integrator::new()
        .tol(1e-9, 1e-13)
        .grading(Grading::Both)
        .integrate(
            |u| match inner(u) {
                Ok(j) => (a * (s - u)).exp() * (fbm_cov(h, u, t) + a * j),
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            },
            0.0,
            s,
        )?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(fbm_cov(h, s, t) + a * j_s + a * outer.value)
}

fn volterra_cov(kernel: &KernelFn, s: f64, t: f64) -> Result<f64> {
    let q = Integrator::new().tol(1e-8, 1e-14);
    Ok(q.integrate(|u| kernel(t, u) * kernel(s, u), 0.0, s)?.value)
}
