//! Level-by-level assembly of the replicating integrand.

use serde::{Deserialize, Serialize};

use super::{
    case1_gadget, case2_gadget, level_grid, ReplicationConfig, Segment, SegmentKind, Strategy,
};
use crate::error::{Error, Result};
use crate::fractional_calculus::{gls_integral, FracOrder, PathFn, PiecewiseLinear};
use crate::path_simulation::GaussianPath;

/// One level of a replication run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// `ξ_{n−1}`.
    pub previous_target: f64,
    /// `ξ_n = Z(t_n)`.
    pub target: f64,
    /// `V(t_n)`.
    pub capital_start: f64,
    /// `V(t_{n+1})`.
    pub capital_end: f64,
    pub kind: SegmentKind,
    pub achieved: bool,
    pub stop: f64,
    pub sup_psi: f64,
    /// Pathwise integral of the level's integrand, when cross-checked.
    pub pathwise: Option<f64>,
}

/// Per-level history and terminal summary of a replication run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationTrace {
    pub levels: Vec<LevelRecord>,
    /// `V(t_{N+1})`, the capital when the last level closes.
    pub terminal_capital: f64,
    /// `Z(T) = ξ`.
    pub terminal_target: f64,
    pub terminal_error: f64,
    /// First level from which `|ξ_k − ξ_{k+1}| ≤ k θ^{rk}` holds up to the last level.
    pub n0: Option<usize>,
    /// First level from which every level achieves its target.
    pub n1: Option<usize>,
    /// Largest relative gap between tracked and pathwise level integrals.
    pub max_cross_check_error: f64,
}

/// Pathwise integral of a segment's integrand, summed over its pieces.
fn pathwise_integral(
    seg: &Segment,
    g: &GaussianPath,
    gf: &PathFn,
    order: FracOrder,
) -> Result<f64> {
    let t = g.times();
    let mut total = 0.0;
    for p in &seg.pieces {
        let end = p.end.min(seg.stop);
        if end <= p.start {
            break;
        }
        let i0 = g.grid.floor_index(p.start);
        let g0 = g.values[i0];
        let mut knots = vec![p.start];
        let mut vals = vec![0.0];
        for (&tk, &gk) in t.iter().zip(&g.values).skip(i0 + 1) {
            if tk >= end {
                break;
            }
            knots.push(tk);
            vals.push(p.gain * (gk - g0));
        }
        knots.push(end);
        vals.push(p.gain * (g.value_at(end) - g0));
        if end - knots[knots.len() - 2] <= 1e-15 * end.abs().max(1.0) {
            knots.remove(knots.len() - 2);
            vals.remove(vals.len() - 2);
        }
        let f: PathFn = PiecewiseLinear::new(knots, vals)?.into();
        total += gls_integral(&f, gf, order, p.start, end)?;
    }
    Ok(seg.sign * total)
}

/// Builds the integrand replicating the target process `target` (sampled on
/// the grid of `g`) as `∫ ψ dG`.
///
/// `ψ ≡ 0` on `[0, t_1]`. On level `n` the capital is compared with
/// `ξ_{n−1}`: if they agree to the configured tolerance, Case II closes the gap
/// `ξ_n − ξ_{n−1}`; otherwise Case I closes `ξ_n − V(t_n)`.
pub fn build_replicating_strategy(
    g: &GaussianPath,
    target: &[f64],
    config: &ReplicationConfig,
) -> Result<(Strategy, ReplicationTrace)> {
    config.validate()?;
    let grid = &g.grid;
    if target.len() != grid.len() || g.values.len() != grid.len() {
        return Err(Error::Grid(format!(
            "target has {} values and the path {}, the grid {}",
            target.len(),
            g.values.len(),
            grid.len()
        )));
    }
    let horizon = grid.horizon();
    let n_levels = config.effective_levels(horizon);
    let t = level_grid(config.theta, horizon, n_levels + 1)?;
    let at = |s: f64| -> Result<f64> {
        grid.index_of(s)
            .map(|i| target[i])
            .ok_or_else(|| Error::Grid(format!("level time {s} is not a grid point")))
    };
    let order = FracOrder::new(config.alpha)?;
    let gf: PathFn = g.into();

    let mut segments = vec![Segment::zero(0, 0.0, t[0], SegmentKind::Zero)];
    let mut levels = Vec::with_capacity(n_levels);
    let mut capital = 0.0;
    let mut prev_target = target[0];
    let mut worst: f64 = 0.0;
    for n in 1..=n_levels {
        let (a, b) = (t[n - 1], t[n]);
        let xi = at(a)?;
        let seg = if (capital - prev_target).abs() <= config.tolerance {
            case2_gadget(g, n, a, b, config, xi - prev_target)?
        } else {
            case1_gadget(g, n, a, b, config, xi - capital)?
        };
        let start = capital;
        capital = if seg.achieved {
            xi
        } else {
            capital + seg.accumulated
        };
        let pathwise =
            if config.cross_check_every > 0 && n % config.cross_check_every == 0 && seg.stop > a {
                let v = pathwise_integral(&seg, g, &gf, order)?;
                worst = worst.max(
                    (v - seg.accumulated).abs() / seg.accumulated.abs().max(f64::MIN_POSITIVE),
                );
                Some(v)
            } else {
                None
            };
        levels.push(LevelRecord {
            level: n,
            t_start: a,
            t_end: b,
            previous_target: prev_target,
            target: xi,
            capital_start: start,
            capital_end: capital,
            kind: seg.kind,
            achieved: seg.achieved,
            stop: seg.stop,
            sup_psi: seg.sup_psi,
            pathwise,
        });
        segments.push(seg);
        prev_target = xi;
    }

    let terminal_target = target[target.len() - 1];
    let n1 = levels
        .iter()
        .rposition(|l| !l.achieved)
        .map_or(Some(1), |i| (i + 1 < levels.len()).then_some(i + 2));
    let xis: Vec<f64> = levels.iter().map(|l| l.target).collect();
    let ok = |k: usize| {
        (xis[k] - xis[k - 1]).abs() <= (k as f64) * config.theta.powf(config.r * k as f64)
    };
    let n0 = (1..xis.len())
        .rev()
        .find(|&k| !ok(k))
        .map_or(Some(1), |k| (k + 1 < xis.len()).then_some(k + 1));
    let trace = ReplicationTrace {
        levels,
        terminal_capital: capital,
        terminal_target,
        terminal_error: (capital - terminal_target).abs(),
        n0,
        n1,
        max_cross_check_error: worst,
    };
    Ok((Strategy::new(segments), trace))
}

/// Chains Case I gadgets so that the capital equals `targets[k]` at `times[k + 1]`
/// whenever level `k` achieves; `times` has one more entry than `targets`, and
/// level `k` runs over `[times[k], times[k + 1])`.
pub fn improper_strategy(
    g: &GaussianPath,
    times: &[f64],
    targets: &[f64],
    config: &ReplicationConfig,
) -> Result<(Strategy, Vec<f64>)> {
    config.validate()?;
    if times.len() != targets.len() + 1 || targets.is_empty() {
        return Err(Error::Grid(format!(
            "{} level times for {} targets",
            times.len(),
            targets.len()
        )));
    }
    let mut segments = vec![Segment::zero(0, 0.0, times[0], SegmentKind::Zero)];
    let mut capital = 0.0;
    let mut ends = Vec::with_capacity(targets.len());
    for (k, &xi) in targets.iter().enumerate() {
        let seg = case1_gadget(g, k + 1, times[k], times[k + 1], config, xi - capital)?;
        capital = if seg.achieved {
            xi
        } else {
            capital + seg.accumulated
        };
        ends.push(capital);
        segments.push(seg);
    }
    Ok((Strategy::new(segments), ends))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::super::replication_grid;
    use super::*;
    use crate::path_simulation::{PathSampler, SamplingMethod};
    use crate::process_models::CovarianceModel;

    fn sampler(c: &ReplicationConfig) -> PathSampler {
        let grid = Arc::new(replication_grid(c, 1.0).unwrap());
        PathSampler::new(
            &CovarianceModel::fbm(c.h, 1.0).unwrap(),
            grid,
            SamplingMethod::Cholesky,
        )
        .unwrap()
    }

    #[test]
    fn constant_claim() {
        let c = ReplicationConfig::default();
        let s = sampler(&c);
        for stream in 0..20 {
            let p = s.sample(2, stream);
            let target = vec![1.7; p.values.len()];
            let (strat, trace) = build_replicating_strategy(&p, &target, &c).unwrap();
            assert!(trace.terminal_error <= 1e-6, "{trace:?}");
            let first = &trace.levels[0];
            assert_eq!(first.kind, SegmentKind::CaseI);
            for (l, seg) in trace.levels.iter().zip(&strat.segments[1..]).skip(1) {
                if trace.levels[0].achieved {
                    assert_eq!(l.kind, SegmentKind::CaseII);
                    assert!(seg.pieces.iter().all(|_| seg.stop == seg.start));
                }
            }
        }
    }

    #[test]
    fn sandwich_and_cross_check() {
        let c = ReplicationConfig {
            cross_check_every: 1,
            ..Default::default()
        };
        let s = sampler(&c);
        for stream in 0..10 {
            let p = s.sample(5, stream);
            let (strat, trace) = build_replicating_strategy(&p, &p.values, &c).unwrap();
            assert!(strat.sup_psi.is_finite());
            for l in &trace.levels {
                if l.achieved {
                    let (lo, hi) = (
                        l.previous_target.min(l.target),
                        l.previous_target.max(l.target),
                    );
                    assert!(l.capital_end >= lo && l.capital_end <= hi, "{l:?}");
                }
            }
            assert!(
                trace.max_cross_check_error <= 1e-3,
                "{}",
                trace.max_cross_check_error
            );
        }
    }

    #[test]
    fn adapted() {
        let c = ReplicationConfig::default();
        let s = sampler(&c);
        let p = s.sample(9, 0);
        let (strat, _) = build_replicating_strategy(&p, &p.values, &c).unwrap();
        let cut = 1.0 - c.theta.powi(5);
        let k = p.grid.index_of(cut).unwrap();
        let mut q = p.clone();
        for v in q.values.iter_mut().skip(k + 1) {
            *v = -*v + 0.3;
        }
        let (other, _) = build_replicating_strategy(&q, &q.values, &c).unwrap();
        let mut compared = 0;
        for (x, y) in strat.segments.iter().zip(&other.segments) {
            if x.end <= cut {
                assert_eq!(x, y);
                compared += 1;
            }
        }
        assert_eq!(compared, 5);
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let c = ReplicationConfig::default();
        let p = sampler(&c).sample(1, 0);
        assert!(build_replicating_strategy(&p, &p.values[1..], &c).is_err());
        let bad = ReplicationConfig { alpha: 0.6, ..c };
        assert!(matches!(
            build_replicating_strategy(&p, &p.values, &bad),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn improper_targets() {
        let c = ReplicationConfig::default();
        let s = sampler(&c);
        let times = level_grid(c.theta, 1.0, c.n_levels + 1).unwrap();
        let targets: Vec<f64> = (1..=c.n_levels).map(|n| 1.0 - 1.0 / n as f64).collect();
        let mut reproduced = 0;
        for stream in 0..50 {
            let p = s.sample(21, stream);
            let (strat, ends) = improper_strategy(&p, &times, &targets, &c).unwrap();
            if ends
                .iter()
                .zip(&targets)
                .all(|(e, x)| (e - x).abs() <= 1e-12)
            {
                reproduced += 1;
            }
            // Running integral stays between consecutive targets.
            let mut prev: f64 = 0.0;
            for (seg, &xi) in strat.segments[1..].iter().zip(&targets) {
                if !seg.achieved {
                    break;
                }
                let (lo, hi) = (prev.min(xi), prev.max(xi));
                for cp in &seg.checkpoints {
                    let v = prev + seg.sign * cp;
                    assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
                }
                prev = xi;
            }
        }
        assert!(reproduced >= 49, "{reproduced} of 50");

        let p = s.sample(21, 0);
        let (strat, _) = improper_strategy(&p, &times, &vec![0.0; c.n_levels], &c).unwrap();
        assert_eq!(strat.sup_psi, 0.0);
    }
}
