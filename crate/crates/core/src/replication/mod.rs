//! Replication of a target process by a bounded adapted integrand against a
//! quasi-helix Gaussian path.
//!
//! Time accumulates toward the horizon at level points `t_n = T − θⁿ`. On each
//! level the integrand is built from quadratic gadgets
//! `ψ = ±gain·(G(t) − G(s))` on sub-intervals starting at `s`, whose running
//! integral is `gain·(G(t) − G(s))²/2`. A level is stopped as soon as the
//! running integral reaches the level's gap.
//!
//! * Case II (capital equals the previous target): `n` equal sub-intervals
//!   with gain `a_n = n^{−2} θ^{(α−H−1)n}`.
//! * Case I (capital is off target): geometric blocks
//!   `[u_j, u_{j+1})`, `u_j = t_{n+1} − Δ_n 2^{−j}`, each split into `q`
//!   sub-intervals with a gain scaled so that every block contributes about
//!   `ρ·|gap|` in expectation; the sum over blocks diverges.

mod bound;
mod build;
mod gadget;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::path_simulation::{GaussianPath, GridKind, SampleGrid};

pub use bound::small_deviation_bound;
pub use build::{build_replicating_strategy, improper_strategy, LevelRecord, ReplicationTrace};
pub use gadget::{case1_gadget, case2_gadget};

/// Uniform cells placed on `[0, t_1]`, where the integrand vanishes.
const LEAD_CELLS: usize = 16;

/// Levels stop once `θⁿ` falls below this fraction of the horizon.
const LEVEL_FLOOR: f64 = 9.094947017729282e-13; // 2^{-40}

/// Parameters of the replicating construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplicationConfig {
    /// Level ratio `θ ∈ (0, 1)`.
    pub theta: f64,
    /// Fractional order of the pathwise integral.
    pub alpha: f64,
    /// Quasi-helix exponent `H` of the integrator.
    pub h: f64,
    /// Hölder exponent `r` of the target process.
    pub r: f64,
    /// Number of levels `N`.
    pub n_levels: usize,
    /// Grid cells per Case II sub-interval.
    pub m: usize,
    /// Case I blocks per level.
    pub case1_blocks: usize,
    /// Sub-intervals per Case I block.
    pub case1_subintervals: usize,
    /// Grid cells per Case I sub-interval.
    pub case1_resolution: usize,
    /// Expected share of the gap contributed by one Case I block.
    pub case1_rho: f64,
    /// Absolute tolerance for "capital equals the previous target".
    pub tolerance: f64,
    /// Cross-check every k-th level against the pathwise integral (0 disables).
    pub cross_check_every: usize,
}

impl Default for ReplicationConfig {
    fn default() -> Self {
        Self {
            theta: 0.5,
            alpha: 0.35,
            h: 0.7,
            r: 0.69,
            n_levels: 10,
            m: 8,
            case1_blocks: 12,
            case1_subintervals: 2,
            case1_resolution: 2,
            case1_rho: 0.25,
            tolerance: 1e-9,
            cross_check_every: 3,
        }
    }
}

impl ReplicationConfig {
    /// Checks the admissibility window `1 − H < α < min(r + 1 − H, 1/2)` and
    /// the discretization parameters.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return cfg(format!("theta must lie in (0, 1), got {}", self.theta));
        }
        if !(self.h > 0.0 && self.h < 1.0) {
            return cfg(format!("H must lie in (0, 1), got {}", self.h));
        }
        if !(self.r > 0.0 && self.r <= 1.0) {
            return cfg(format!("r must lie in (0, 1], got {}", self.r));
        }
        let upper = (self.r + 1.0 - self.h).min(0.5);
        if !(1.0 - self.h < self.alpha && self.alpha < upper) {
            return cfg(format!(
                "alpha = {} violates 1 - H < alpha < min(r + 1 - H, 1/2): need {} < alpha < {}",
                self.alpha,
                1.0 - self.h,
                upper
            ));
        }
        if self.n_levels < 2 {
            return cfg(format!(
                "n_levels must be at least 2, got {}",
                self.n_levels
            ));
        }
        if self.m == 0
            || self.case1_blocks == 0
            || self.case1_subintervals == 0
            || self.case1_resolution == 0
        {
            return cfg(
                "m, case1_blocks, case1_subintervals and case1_resolution must be positive".into(),
            );
        }
        if !(self.case1_rho > 0.0 && self.case1_rho.is_finite()) {
            return cfg(format!(
                "case1_rho must be positive, got {}",
                self.case1_rho
            ));
        }
        if !(self.tolerance >= 0.0) {
            return cfg(format!(
                "tolerance must be nonnegative, got {}",
                self.tolerance
            ));
        }
        Ok(())
    }

    /// Levels actually used for horizon `T`: at most `n_levels`, and only while
    /// `θ^{n+1} ≥ 2^{−40} T` so that level ends stay resolvable.
    pub fn effective_levels(&self, horizon: f64) -> usize {
        let mut n = 0;
        while n < self.n_levels && self.theta.powi(n as i32 + 2) >= LEVEL_FLOOR * horizon {
            n += 1;
        }
        n
    }

    /// Case II gain `a_n = n^{−2} θ^{(α−H−1)n}`.
    pub fn case2_gain(&self, n: usize) -> f64 {
        let nf = n as f64;
        self.theta.powf((self.alpha - self.h - 1.0) * nf) / (nf * nf)
    }
}

/// Level points `[T − θ, T − θ², …, T − θ^N]`.
pub fn level_grid(theta: f64, horizon: f64, n: usize) -> Result<Vec<f64>> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(domain(format!("theta must lie in (0, 1), got {theta}")));
    }
    if n == 0 {
        return Err(domain("at least one level is needed"));
    }
    if !(theta < horizon) {
        return Err(domain(format!(
            "theta = {theta} must be below the horizon {horizon}"
        )));
    }
    Ok((1..=n).map(|k| horizon - theta.powi(k as i32)).collect())
}

/// Case II sub-interval boundaries `t_n + kΔ_n/n`, `k = 0..=n`.
pub(crate) fn case2_points(a: f64, b: f64, n: usize) -> Vec<f64> {
    let mut p: Vec<f64> = (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect();
    p[n] = b;
    p
}

/// Case I block boundaries `u_j = b − (b − a) 2^{−j}`, `j = 0..=blocks`.
pub(crate) fn case1_points(a: f64, b: f64, blocks: usize) -> Vec<f64> {
    (0..=blocks)
        .map(|j| {
            if j == 0 {
                a
            } else {
                b - (b - a) * 0.5f64.powi(j as i32)
            }
        })
        .collect()
}

/// Grid containing every point the construction needs on `[0, T]`: uniform
/// cells before `t_1`, then for each level the Case II sub-partition with `m`
/// cells per sub-interval and the Case I blocks with their sub-intervals.
pub fn replication_grid(config: &ReplicationConfig, horizon: f64) -> Result<SampleGrid> {
    config.validate()?;
    let levels = config.effective_levels(horizon);
    let t = level_grid(config.theta, horizon, levels + 1)?;
    let mut pts = Vec::new();
    pts.extend((0..=LEAD_CELLS).map(|k| t[0] * k as f64 / LEAD_CELLS as f64));
    for n in 1..=levels {
        let (a, b) = (t[n - 1], t[n]);
        for w in case2_points(a, b, n).windows(2) {
            pts.extend(case2_points(w[0], w[1], config.m));
        }
        let q = config.case1_subintervals;
        for w in case1_points(a, b, config.case1_blocks).windows(2) {
            for s in case2_points(w[0], w[1], q).windows(2) {
                pts.extend(case2_points(s[0], s[1], config.case1_resolution));
            }
        }
    }
    pts.push(horizon);
    pts.sort_by(f64::total_cmp);
    let tol = 1e-12 * horizon.max(1.0);
    let mut times: Vec<f64> = Vec::with_capacity(pts.len());
    for p in pts {
        match times.last() {
            Some(&last) if p - last <= tol => {}
            _ => times.push(p),
        }
    }
    SampleGrid::from_times(
        times,
        GridKind::Geometric {
            theta: config.theta,
            levels,
            m: config.m,
        },
    )
}

/// How the integrand is built on one segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    Zero,
    CaseI,
    CaseII,
}

/// `ψ(t) = sign·gain·(G(t) − G(start))` on `[start, end)`, cut at the segment's stop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub gain: f64,
}

/// The integrand on one level `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub level: usize,
    pub start: f64,
    pub end: f64,
    pub kind: SegmentKind,
    /// Signed gap the segment tries to close.
    pub gap: f64,
    pub sign: f64,
    /// Case II gain `a_n`.
    pub gain: Option<f64>,
    /// Stopping time; `end` when the gap was not reached.
    pub stop: f64,
    pub achieved: bool,
    /// Signed value of `∫ ψ dG` over the segment.
    pub accumulated: f64,
    /// Unsigned running integral at the end of each piece reached.
    pub checkpoints: Vec<f64>,
    pub pieces: Vec<Piece>,
    pub sup_psi: f64,
}

impl Segment {
    pub(crate) fn zero(level: usize, start: f64, end: f64, kind: SegmentKind) -> Self {
        Self {
            level,
            start,
            end,
            kind,
            gap: 0.0,
            sign: 1.0,
            gain: None,
            stop: start,
            achieved: true,
            accumulated: 0.0,
            checkpoints: Vec::new(),
            pieces: Vec::new(),
            sup_psi: 0.0,
        }
    }

    /// Value of the integrand at `t` for the integrator path `g`.
    pub fn psi(&self, g: &GaussianPath, t: f64) -> f64 {
        if t < self.start || t >= self.stop.min(self.end) {
            return 0.0;
        }
        self.pieces
            .iter()
            .find(|p| t >= p.start && t < p.end)
            .map_or(0.0, |p| {
                self.sign * p.gain * (g.value_at(t) - g.value_at(p.start))
            })
    }
}

/// Piecewise definition of the replicating integrand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub segments: Vec<Segment>,
    /// Supremum of `|ψ|` over all segments.
    pub sup_psi: f64,
}

impl Strategy {
    pub(crate) fn new(segments: Vec<Segment>) -> Self {
        let sup_psi = segments.iter().map(|s| s.sup_psi).fold(0.0, f64::max);
        Self { segments, sup_psi }
    }

    pub fn psi(&self, g: &GaussianPath, t: f64) -> f64 {
        self.segments
            .iter()
            .find(|s| t >= s.start && t < s.end)
            .map_or(0.0, |s| s.psi(g, t))
    }
}
