//! Expected utility maximization under a budget `E[φ(T) X] = w`: inverse
//! marginal utilities, the budget constant `c`, optimal profiles
//! `X* = I(cφ(T))`, relative entropy, and the constants of the fractional
//! Black–Scholes example.

mod example42;

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::martingale_tools::{density_terminal, ClaimSpec, DensityProcess, ThetaProcess};
use crate::path_simulation::{GaussianPath, PathSampler, SampleGrid, SamplingMethod};
use crate::process_models::CovarianceModel;
use crate::stats::{estimate, Estimate};

pub use example42::{
    example42_theta, hidden_semimartingale_constants, kernel_drift_integral, prelimit_variance,
    Example42, HiddenConstants, PrelimitVariance,
};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A utility given by `u`, its derivative and its domain `(lower, ∞)`.
#[derive(Clone)]
pub struct CustomUtility {
    pub name: String,
    pub u: RealFn,
    pub du: RealFn,
    /// Left end of the domain; `-∞` for utilities on the whole line.
    pub lower: f64,
}

/// Strictly increasing, strictly concave utility.
#[derive(Clone)]
pub enum UtilityFunction {
    /// `u(x) = 1 − e^{−βx}`.
    Exponential {
        beta: f64,
    },
    /// `u(x) = x^γ/γ` on `(0, ∞)`.
    Power {
        gamma: f64,
    },
    /// `u(x) = log x` on `(0, ∞)`.
    Log,
    Custom(CustomUtility),
}

impl fmt::Debug for UtilityFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Exponential { beta } => write!(f, "Exponential(beta = {beta})"),
            Self::Power { gamma } => write!(f, "Power(gamma = {gamma})"),
            Self::Log => f.write_str("Log"),
            Self::Custom(c) => write!(f, "Custom({}, lower = {})", c.name, c.lower),
        }
    }
}

impl UtilityFunction {
    pub fn exponential(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(domain(format!(
                "risk aversion must be positive, got {beta}"
            )));
        }
        Ok(Self::Exponential { beta })
    }

    pub fn power(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(domain(format!(
                "power utility needs gamma in (0, 1), got {gamma}"
            )));
        }
        Ok(Self::Power { gamma })
    }

    /// Custom utility; checked for monotonicity and concavity on a sample grid.
    pub fn custom<U, D>(name: impl Into<String>, u: U, du: D, lower: f64) -> Result<Self>
    where
        U: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let s = Self::Custom(CustomUtility {
            name: name.into(),
            u: Arc::new(u),
            du: Arc::new(du),
            lower,
        });
        s.check_shape()?;
        Ok(s)
    }

    pub fn u(&self, x: f64) -> f64 {
        match self {
            Self::Exponential { beta } => 1.0 - (-beta * x).exp(),
            Self::Power { gamma } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    x.powf(*gamma) / gamma
                }
            }
            Self::Log => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    x.ln()
                }
            }
            Self::Custom(c) => {
                if x < c.lower {
                    f64::NEG_INFINITY
                } else {
                    (c.u)(x)
                }
            }
        }
    }

    pub fn du(&self, x: f64) -> f64 {
        match self {
            Self::Exponential { beta } => beta * (-beta * x).exp(),
            Self::Power { gamma } => x.powf(gamma - 1.0),
            Self::Log => 1.0 / x,
            Self::Custom(c) => (c.du)(x),
        }
    }

    /// Left end of the natural domain.
    pub fn lower(&self) -> f64 {
        match self {
            Self::Exponential { .. } => f64::NEG_INFINITY,
            Self::Power { .. } | Self::Log => 0.0,
            Self::Custom(c) => c.lower,
        }
    }

    /// `π₁ = lim_{x↑∞} u′(x)`.
    pub fn pi1(&self) -> f64 {
        match self {
            Self::Custom(c) => (c.du)(1e12).max(0.0),
            _ => 0.0,
        }
    }

    /// `π₂ = u′(0+)` (for the half-line restriction of the utility).
    pub fn pi2(&self) -> f64 {
        match self {
            Self::Exponential { beta } => *beta,
            Self::Power { .. } | Self::Log => f64::INFINITY,
            Self::Custom(c) => (c.du)(c.lower.max(0.0) + 1e-300),
        }
    }

    /// Sampled check that `u′ > 0` and `u′` strictly decreases on 1000 points.
    pub fn check_shape(&self) -> Result<()> {
        let lo = self.lower();
        let xs: Vec<f64> = if lo.is_finite() {
            (0..1000)
                .map(|k| lo + 10f64.powf(-3.0 + 6.0 * k as f64 / 999.0))
                .collect()
        } else {
            (0..1000).map(|k| -10.0 + 20.0 * k as f64 / 999.0).collect()
        };
        let d: Vec<f64> = xs.iter().map(|&x| self.du(x)).collect();
        if d.iter().any(|v| !(*v > 0.0)) {
            return Err(domain(format!(
                "{self:?}: marginal utility must be positive"
            )));
        }
        if d.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(domain(format!(
                "{self:?}: marginal utility must strictly decrease"
            )));
        }
        Ok(())
    }

    /// `I(y) = (u′)^{−1}(y)`, or with `restricted` the clipped inverse `I⁺`
    /// that is `+∞` for `y ≤ π₁` and `0` for `y ≥ π₂`.
    pub fn inverse_marginal(&self, y: f64, restricted: bool) -> Result<f64> {
        if !(y > 0.0) {
            return Err(domain(format!(
                "inverse marginal utility needs y > 0, got {y}"
            )));
        }
        if restricted {
            if y <= self.pi1() {
                return Ok(f64::INFINITY);
            }
            if y >= self.pi2() {
                return Ok(0.0);
            }
        }
        Ok(match self {
            Self::Exponential { beta } => -(y / beta).ln() / beta,
            Self::Power { gamma } => y.powf(-1.0 / (1.0 - gamma)),
            Self::Log => 1.0 / y,
            Self::Custom(c) => invert_decreasing(&*c.du, y, c.lower)?,
        })
    }
}

/// Solves `du(x) = y` for a strictly decreasing `du` on `(lower, ∞)`.
fn invert_decreasing(du: &(dyn Fn(f64) -> f64 + Send + Sync), y: f64, lower: f64) -> Result<f64> {
    let start = if lower.is_finite() { lower + 1.0 } else { 0.0 };
    let (mut lo, mut hi) = (start, start);
    let mut step = 1.0;
    // Move lo left until du(lo) ≥ y and hi right until du(hi) ≤ y.
    while du(lo) < y {
        lo = if lower.is_finite() {
            lower + (lo - lower) / 4.0
        } else {
            lo - step
        };
        step *= 4.0;
        if lo - lower <= 1e-300 || step > 1e300 {
            return Err(Error::Bracket(format!(
                "no x with u'(x) = {y} above the domain end"
            )));
        }
    }
    step = 1.0;
    while du(hi) > y {
        hi += step;
        step *= 4.0;
        if step > 1e300 {
            return Err(Error::Bracket(format!("u'(x) stays above {y}")));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if du(mid) > y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Monte Carlo samples of `φ(T)` with the terminal Wiener value on each path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySamples {
    pub phi: Vec<f64>,
    pub wiener_terminal: Vec<f64>,
}

impl DensitySamples {
    /// Draws `n` Wiener paths on `grid` and evaluates the density on each.
    pub fn draw(
        density: &DensityProcess,
        grid: Arc<SampleGrid>,
        n: usize,
        seed: u64,
    ) -> Result<Self> {
        let method = if grid.uniform_step().is_some() {
            SamplingMethod::Circulant
        } else {
            SamplingMethod::Cholesky
        };
        let model = CovarianceModel::fbm(0.5, grid.horizon())?;
        let sampler = PathSampler::new(&model, grid, method)?;
        let pairs: Vec<(f64, f64)> = (0..n as u64)
            .into_par_iter()
            .map(|k| {
                let w: GaussianPath = sampler.sample(seed, k);
                (
                    density_terminal(&density.theta, &w),
                    w.values[w.values.len() - 1],
                )
            })
            .collect();
        let (phi, wiener_terminal) = pairs.into_iter().unzip();
        Ok(Self {
            phi,
            wiener_terminal,
        })
    }
}

/// Budget-constrained problem on a fixed set of density samples.
#[derive(Debug, Clone)]
pub struct UtilityProblem {
    pub utility: UtilityFunction,
    pub w: f64,
    pub density: DensityProcess,
    pub samples: DensitySamples,
    /// Profiles constrained to be nonnegative (`I⁺` instead of `I`).
    pub restricted: bool,
    /// Budget constant once solved.
    pub c: Option<f64>,
}

/// Outcome of the budget solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetSolution {
    pub c: f64,
    /// Monte Carlo `E[φ I(cφ)]` at the solution.
    pub budget: Estimate,
    pub iterations: usize,
}

impl UtilityProblem {
    pub fn new(
        utility: UtilityFunction,
        w: f64,
        density: DensityProcess,
        samples: DensitySamples,
        restricted: bool,
    ) -> Result<Self> {
        utility.check_shape()?;
        if !w.is_finite() {
            return Err(domain(format!("budget must be finite, got {w}")));
        }
        if restricted && !(w > 0.0) {
            return Err(domain(format!(
                "restricted problems need a positive budget, got {w}"
            )));
        }
        if samples.phi.is_empty() || samples.phi.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(domain("density samples must be positive and finite"));
        }
        Ok(Self {
            utility,
            w,
            density,
            samples,
            restricted,
            c: None,
        })
    }

    /// Per-sample `φ I(cφ)`; infinite where `I⁺` overflows.
    fn budget_terms(&self, c: f64) -> Result<Vec<f64>> {
        self.samples
            .phi
            .iter()
            .map(|&p| Ok(p * self.utility.inverse_marginal(c * p, self.restricted)?))
            .collect()
    }

    fn budget_mean(&self, c: f64) -> Result<f64> {
        let t = self.budget_terms(c)?;
        Ok(t.iter().sum::<f64>() / t.len() as f64)
    }

    pub fn profile_at(&self, c: f64) -> Result<Vec<f64>> {
        self.samples
            .phi
            .iter()
            .map(|&p| self.utility.inverse_marginal(c * p, self.restricted))
            .collect()
    }
}

/// Finds `c` with `E[φ I(cφ)] = w` on the problem's samples: brackets on
/// `log c` by factors of 4, then bisects. The sample budget is monotone in `c`.
pub fn solve_budget_constant(problem: &mut UtilityProblem) -> Result<BudgetSolution> {
    let w = problem.w;
    let f = |c: f64| problem.budget_mean(c).map(|b| b - w);
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    let mut curve = Vec::new();
    let mut k = 0;
    // f decreases in c: lo needs f > 0, hi needs f < 0.
    while f(lo)? <= 0.0 {
        if curve.len() < 12 {
            curve.push((lo, f(lo)? + w));
        }
        lo /= 4.0;
        k += 1;
        if k > 400 {
            return Err(Error::Bracket(format!(
                "budget {w} not reached for small c; curve {curve:?}"
            )));
        }
    }
    k = 0;
    while f(hi)? >= 0.0 {
        if curve.len() < 24 {
            curve.push((hi, f(hi)? + w));
        }
        hi *= 4.0;
        k += 1;
        if k > 400 {
            return Err(Error::Bracket(format!(
                "budget {w} not reached for large c; curve {curve:?}"
            )));
        }
    }
    let mut iterations = 0;
    while iterations < 300 {
        let mid = (0.5 * (lo.ln() + hi.ln())).exp();
        if mid <= lo || mid >= hi {
            break;
        }
        let v = f(mid)?;
        if v == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if v > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    // Keep the end whose budget is closer to w.
    let c = if f(lo)?.abs() <= f(hi)?.abs() { lo } else { hi };
    problem.c = Some(c);
    let budget = estimate(&problem.budget_terms(c)?);
    Ok(BudgetSolution {
        c,
        budget,
        iterations,
    })
}

/// Summary of an optimal profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub c: f64,
    pub profile: Vec<f64>,
    pub expected_utility: Estimate,
    /// Monte Carlo `E[φ X*]`.
    pub budget: Estimate,
    pub budget_residual: f64,
    /// Samples where `I⁺` overflowed.
    pub infeasible: usize,
    /// `E u(X*) = −∞` on the samples.
    pub utility_unbounded: bool,
}

/// `X* = I(cφ(T))` (or `I⁺`) on every sample, with its expected utility and budget.
pub fn optimal_profile(problem: &UtilityProblem) -> Result<ProfileSummary> {
    let c = problem
        .c
        .ok_or_else(|| Error::Config("solve the budget constant first".into()))?;
    let profile = problem.profile_at(c)?;
    let infeasible = profile.iter().filter(|x| x.is_infinite()).count();
    let us: Vec<f64> = profile.iter().map(|&x| problem.utility.u(x)).collect();
    let utility_unbounded = us.contains(&f64::NEG_INFINITY);
    let expected_utility = estimate(&us);
    let budget = estimate(
        &profile
            .iter()
            .zip(&problem.samples.phi)
            .map(|(x, p)| x * p)
            .collect::<Vec<_>>(),
    );
    Ok(ProfileSummary {
        c,
        budget_residual: budget.mean - problem.w,
        profile,
        expected_utility,
        budget,
        infeasible,
        utility_unbounded,
    })
}

/// `H(P*|P) = E[φ log φ]` with its standard error.
pub fn relative_entropy(phi: &[f64]) -> Estimate {
    estimate(&phi.iter().map(|p| p * p.ln()).collect::<Vec<_>>())
}

/// Closed-form exponential-utility profile
/// `X* = −(1/β)(∫ϑ dW − ½∫ϑ² ds) + w + H(P*|P)/β` on one Wiener path.
pub fn exponential_profile_closed_form(
    theta: &ThetaProcess,
    beta: f64,
    w: f64,
    entropy: f64,
    wiener: &GaussianPath,
) -> Result<f64> {
    if !entropy.is_finite() {
        return Err(domain(format!(
            "relative entropy is not finite ({entropy}); the density is too heavy-tailed"
        )));
    }
    if !(beta > 0.0) {
        return Err(domain(format!(
            "risk aversion must be positive, got {beta}"
        )));
    }
    let log_phi = density_terminal(theta, wiener).ln();
    Ok(-log_phi / beta + w + entropy / beta)
}

/// `E φ^{−γ/(1−γ)}` for the power utility, and the profile `(w/d) φ^{−1/(1−γ)}`.
pub fn power_profile_constant(phi: &[f64], gamma: f64) -> Estimate {
    estimate(
        &phi.iter()
            .map(|p| p.powf(-gamma / (1.0 - gamma)))
            .collect::<Vec<_>>(),
    )
}

/// The process `U(t) = I(cφ(t))` as a replication target, with
/// `φ(t) = exp{∫_0^t ϑ dW − ½∫_0^t ϑ² ds}` evaluated on the joint path's Wiener part.
pub fn profile_claim(problem: &UtilityProblem, horizon: f64, r: f64) -> Result<ClaimSpec> {
    let c = problem
        .c
        .ok_or_else(|| Error::Config("solve the budget constant first".into()))?;
    let utility = problem.utility.clone();
    let restricted = problem.restricted;
    let theta = problem.density.theta.clone();
    let th = theta.clone();
    let log_phi = move |i: usize, w: &GaussianPath| -> f64 {
        let t = w.times();
        (0..i)
            .map(|k| {
                let v = th.eval(k, w);
                v * (w.values[k + 1] - w.values[k]) - 0.5 * v * v * (t[k + 1] - t[k])
            })
            .sum()
    };
    let lp = log_phi.clone();
    let u2 = utility.clone();
    let state = move |i: usize, p: &crate::path_simulation::JointPath| {
        utility
            .inverse_marginal(c * log_phi(i, &p.wiener).exp(), restricted)
            .unwrap_or(f64::NAN)
    };
    let terminal = move |p: &crate::path_simulation::JointPath| {
        let n = p.wiener.values.len() - 1;
        u2.inverse_marginal(c * lp(n, &p.wiener).exp(), restricted)
            .unwrap_or(f64::NAN)
    };
    let mean = problem.utility.inverse_marginal(c, restricted)?;
    Ok(ClaimSpec::new(
        format!("optimal profile {:?}", problem.utility),
        horizon,
        mean,
        theta,
        r,
        None,
        state,
        terminal,
    ))
}

#[cfg(test)]
mod tests;
