//! Itô-side tools: integrands `ϑ` of martingale representations, left-point
//! Itô sums, the density `φ(T) = exp{∫ϑ dW − ½∫ϑ² ds}`, and a library of
//! claims whose representation is known in closed form.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::path_simulation::{GaussianPath, JointPath};
use crate::process_models::FbmKernel;

/// `ϑ(i, times, w)`: value on the cell `[t_i, t_{i+1})` given the full
/// deterministic grid and the Wiener values `w = W(t_0..=t_i)`.
pub type ThetaFn = dyn Fn(usize, &[f64], &[f64]) -> f64 + Send + Sync;

/// Integrand of a martingale representation with its declared moment order `p`
/// (`∫_0^T |ϑ|^{2p} dt < ∞`; `p = ∞` for bounded integrands).
#[derive(Clone)]
pub struct ThetaProcess {
    pub name: String,
    pub p: f64,
    f: Arc<ThetaFn>,
}

impl fmt::Debug for ThetaProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ThetaProcess({}, p = {})", self.name, self.p)
    }
}

impl ThetaProcess {
    pub fn new<F>(name: impl Into<String>, p: f64, f: F) -> Result<Self>
    where
        F: Fn(usize, &[f64], &[f64]) -> f64 + Send + Sync + 'static,
    {
        if !(p > 1.0) {
            return Err(domain(format!("moment order p must exceed 1, got {p}")));
        }
        Ok(Self {
            name: name.into(),
            p,
            f: Arc::new(f),
        })
    }

    /// `ϑ ≡ c`.
    pub fn constant(c: f64) -> Self {
        Self {
            name: format!("constant({c})"),
            p: f64::INFINITY,
            f: Arc::new(move |_, _, _| c),
        }
    }

    /// Value on cell `i` of the Wiener path; only `W(t_0..=t_i)` is exposed.
    pub fn eval(&self, i: usize, wiener: &GaussianPath) -> f64 {
        (self.f)(i, wiener.times(), &wiener.values[..=i])
    }

    /// Cell values `ϑ_0, …, ϑ_{n−1}` along a path.
    pub fn values(&self, wiener: &GaussianPath) -> Vec<f64> {
        (0..wiener.values.len() - 1)
            .map(|i| self.eval(i, wiener))
            .collect()
    }
}

/// Left-point Itô sums `Σ_{k<i} ϑ_k (W(t_{k+1}) − W(t_k))` on the grid of `wiener`.
pub fn ito_integral(theta: &ThetaProcess, wiener: &GaussianPath) -> GaussianPath {
    let w = &wiener.values;
    let mut values = Vec::with_capacity(w.len());
    let mut acc = 0.0;
    values.push(0.0);
    for i in 0..w.len() - 1 {
        acc += theta.eval(i, wiener) * (w[i + 1] - w[i]);
        values.push(acc);
    }
    GaussianPath {
        grid: Arc::clone(&wiener.grid),
        values,
        model: format!("ito({})", theta.name),
        seed: wiener.seed,
        stream: wiener.stream,
    }
}

/// `φ(T) = exp{∫ϑ dW − ½∫ϑ² ds}` with both integrals on the grid of `wiener`.
pub fn density_terminal(theta: &ThetaProcess, wiener: &GaussianPath) -> f64 {
    let t = wiener.times();
    let w = &wiener.values;
    let mut e = 0.0;
    for i in 0..w.len() - 1 {
        let th = theta.eval(i, wiener);
        e += th * (w[i + 1] - w[i]) - 0.5 * th * th * (t[i + 1] - t[i]);
    }
    e.exp()
}

/// Density process of an equivalent measure change driven by `theta`.
#[derive(Debug, Clone)]
pub struct DensityProcess {
    pub theta: ThetaProcess,
}

impl DensityProcess {
    pub fn new(theta: ThetaProcess) -> Self {
        Self { theta }
    }

    pub fn terminal(&self, wiener: &GaussianPath) -> f64 {
        density_terminal(&self.theta, wiener)
    }
}

/// Hölder order `½ − 1/(2p)` available for `∫ϑ dW` when `∫|ϑ|^{2p} < ∞`.
pub fn holder_of_ito_integral(p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(domain(format!("moment order p must exceed 1, got {p}")));
    }
    Ok(0.5 - 0.5 / p)
}

/// Empirical summary of `∫_0^T |ϑ|^{2p} dt` over sampled paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub p: f64,
    pub median: f64,
    pub q95: f64,
    pub max: f64,
    pub finite: bool,
}

/// Quantiles of `∫|ϑ|^{2p}` (Riemann sums on each path's grid); `p = ∞` is
/// checked through `sup|ϑ|`.
pub fn moment_check(theta: &ThetaProcess, p: f64, paths: &[GaussianPath]) -> MomentCheck {
    let mut v: Vec<f64> = paths
        .iter()
        .map(|w| {
            let t = w.times();
            let th = theta.values(w);
            if p.is_infinite() {
                th.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
            } else {
                th.iter()
                    .enumerate()
                    .map(|(i, x)| x.abs().powf(2.0 * p) * (t[i + 1] - t[i]))
                    .sum()
            }
        })
        .collect();
    v.sort_by(f64::total_cmp);
    let q = |f: f64| {
        v.get(((v.len() as f64 - 1.0) * f).round() as usize)
            .copied()
            .unwrap_or(f64::NAN)
    };
    MomentCheck {
        p,
        median: q(0.5),
        q95: q(0.95),
        max: q(1.0),
        finite: v.iter().all(|x| x.is_finite()),
    }
}

/// Names accepted by [`claim_library`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    Constant(f64),
    TerminalWiener,
    TerminalWienerSquared,
    ExponentialMartingale(f64),
    FbmTerminal(f64),
}

impl FromStr for ClaimKind {
    type Err = Error;

    /// Parses `constant(c)`, `terminal_wiener`, `terminal_wiener_squared`,
    /// `exponential_martingale(σ)` or `fbm_terminal(H)`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = match s.find('(') {
            Some(i) if s.ends_with(')') => {
                let a = s[i + 1..s.len() - 1].trim();
                let v: f64 = a
                    .parse()
                    .map_err(|_| domain(format!("bad claim argument '{a}'")))?;
                (&s[..i], Some(v))
            }
            _ => (s, None),
        };
        match (head, arg) {
            ("constant", Some(c)) => Ok(Self::Constant(c)),
            ("terminal_wiener", None) => Ok(Self::TerminalWiener),
            ("terminal_wiener_squared", None) => Ok(Self::TerminalWienerSquared),
            ("exponential_martingale", Some(s)) => Ok(Self::ExponentialMartingale(s)),
            ("fbm_terminal", Some(h)) => Ok(Self::FbmTerminal(h)),
            _ => Err(domain(format!("unknown claim '{s}'"))),
        }
    }
}

type StateFn = dyn Fn(usize, &JointPath) -> f64 + Send + Sync;
type TerminalFn = dyn Fn(&JointPath) -> f64 + Send + Sync;

/// A claim `ξ` with its representation: the adapted state `Z(t)` with
/// `Z(T) = ξ`, the integrand `ϑ`, and the Hölder order `r` of `Z`.
#[derive(Clone)]
pub struct ClaimSpec {
    pub name: String,
    pub horizon: f64,
    /// `E ξ = Z(0)`.
    pub mean: f64,
    pub theta: ThetaProcess,
    pub r: f64,
    /// Hurst index the joint path must carry, when `Z` uses the transformed path.
    pub joint_h: Option<f64>,
    state: Arc<StateFn>,
    terminal: Arc<TerminalFn>,
}

impl fmt::Debug for ClaimSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ClaimSpec({}, T = {}, r = {}, {:?})",
            self.name, self.horizon, self.r, self.theta
        )
    }
}

impl ClaimSpec {
    /// Claim from its adapted state `Z(t_i)` and terminal value `ξ`.
    #[allow(clippy::too_many_arguments)]
    pub fn new<S, F>(
        name: impl Into<String>,
        horizon: f64,
        mean: f64,
        theta: ThetaProcess,
        r: f64,
        joint_h: Option<f64>,
        state: S,
        terminal: F,
    ) -> Self
    where
        S: Fn(usize, &JointPath) -> f64 + Send + Sync + 'static,
        F: Fn(&JointPath) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            horizon,
            mean,
            theta,
            r,
            joint_h,
            state: Arc::new(state),
            terminal: Arc::new(terminal),
        }
    }

    /// `Z(t_i)`.
    pub fn state(&self, i: usize, path: &JointPath) -> f64 {
        (self.state)(i, path)
    }

    /// `Z` on the whole grid.
    pub fn state_path(&self, path: &JointPath) -> Vec<f64> {
        (0..path.wiener.values.len())
            .map(|i| self.state(i, path))
            .collect()
    }

    /// `ξ` evaluated directly from the path.
    pub fn terminal(&self, path: &JointPath) -> f64 {
        (self.terminal)(path)
    }
}

/// Claims with closed-form representations on `[0, horizon]`.
pub fn claim_library(name: &str, horizon: f64) -> Result<ClaimSpec> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(domain(format!("horizon must be positive, got {horizon}")));
    }
    let kind: ClaimKind = name.parse()?;
    let t_end = horizon;
    let last = |p: &JointPath| p.wiener.values.len() - 1;
    Ok(match kind {
        ClaimKind::Constant(c) => ClaimSpec {
            name: format!("constant({c})"),
            horizon,
            mean: c,
            theta: ThetaProcess::constant(0.0),
            r: 1.0,
            joint_h: None,
            state: Arc::new(move |_, _| c),
            terminal: Arc::new(move |_| c),
        },
        ClaimKind::TerminalWiener => ClaimSpec {
            name: "terminal_wiener".into(),
            horizon,
            mean: 0.0,
            theta: ThetaProcess::constant(1.0),
            r: 0.49,
            joint_h: None,
            state: Arc::new(|i, p| p.wiener.values[i]),
            terminal: Arc::new(move |p| p.wiener.values[last(p)]),
        },
        ClaimKind::TerminalWienerSquared => ClaimSpec {
            name: "terminal_wiener_squared".into(),
            horizon,
            mean: horizon,
            theta: ThetaProcess::new("2W", 50.0, |i, _, w| 2.0 * w[i])?,
            r: 0.49,
            joint_h: None,
            state: Arc::new(move |i, p| {
                let w = p.wiener.values[i];
                w * w + (t_end - p.wiener.times()[i])
            }),
            terminal: Arc::new(move |p| p.wiener.values[last(p)].powi(2)),
        },
        ClaimKind::ExponentialMartingale(s) => {
            let z = move |t: f64, w: f64| (s * w - 0.5 * s * s * t).exp();
            ClaimSpec {
                name: format!("exponential_martingale({s})"),
                horizon,
                mean: 1.0,
                theta: ThetaProcess::new(format!("{s}Z"), 50.0, move |i, t, w| s * z(t[i], w[i]))?,
                r: 0.49,
                joint_h: None,
                state: Arc::new(move |i, p| z(p.wiener.times()[i], p.wiener.values[i])),
                terminal: Arc::new(move |p| z(t_end, p.wiener.values[last(p)])),
            }
        }
        ClaimKind::FbmTerminal(h) => {
            let kernel = FbmKernel::new(h)?;
            if h <= 0.5 {
                return Err(domain(format!("fbm_terminal needs H in (1/2, 1), got {h}")));
            }
            // ϑ_s = K(T, s), averaged over each cell since it is singular at 0;
            // ∫|ϑ|^{2p} < ∞ exactly when (2H − 1) p < 1.
            let p = 0.99 / (2.0 * h - 1.0);
            let theta = ThetaProcess::new(format!("K({h})"), p, move |i, t, _| {
                let c = |s: f64| kernel.cov_with_wiener(t_end, s).unwrap_or(f64::NAN);
                (c(t[i + 1]) - c(t[i])) / (t[i + 1] - t[i])
            })?;
            ClaimSpec {
                name: format!("fbm_terminal({h})"),
                horizon,
                mean: 0.0,
                theta,
                r: h - 0.01,
                joint_h: Some(h),
                state: Arc::new(|i, p| p.transformed.values[i]),
                terminal: Arc::new(move |p| p.transformed.values[last(p)]),
            }
        }
    })
}
