//! Acceptance suite: twelve criteria with pinned tolerances. Each criterion
//! returns its metrics and a verdict; criteria known to fail carry a short
//! analysis in their notes.

use std::sync::Arc;
use std::time::Instant;

use fracrep_core::fractional_calculus::{
    gls_integral, lambda_alpha, riemann_sum, verify_bound, weighted_norm,
};
use fracrep_core::martingale_tools::{claim_library, holder_of_ito_integral};
use fracrep_core::path_simulation::{
    holder_exponent_estimate, path_rng, JointSampler, PathSampler,
};
use fracrep_core::replication::{
    build_replicating_strategy, replication_grid, small_deviation_bound, ReplicationTrace,
};
use fracrep_core::stats::{estimate, median};
use fracrep_core::utility_max::{
    hidden_semimartingale_constants, kernel_drift_integral, optimal_profile,
    power_profile_constant, prelimit_variance, relative_entropy, solve_budget_constant,
    DensitySamples, UtilityFunction, UtilityProblem,
};
use fracrep_core::{
    CovarianceModel, DensityProcess, FracOrder, GaussianPath, GridKind, JointPath, PathFn,
    PiecewiseLinear, ReplicationConfig, SampleGrid, SamplingMethod, Strategy, ThetaProcess,
};
use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use statrs::function::gamma::gamma;

use crate::error::CliResult;
use crate::report::{CriterionResult, Metric, Rule};

/// Criteria that fail for structural reasons analysed in their notes.
pub const KNOWN_RED: &[u8] = &[8, 10];

/// Number of criteria, the determinism check included.
pub const CRITERIA: u8 = 12;

/// Seed of criterion `id` derived from the run seed.
fn sub_seed(seed: u64, id: u8) -> u64 {
    seed.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(u64::from(id) * 1_000_003)
}

fn uniform(steps: usize) -> CliResult<Arc<SampleGrid>> {
    Ok(Arc::new(SampleGrid::uniform(1.0, steps)?))
}

fn fbm_sampler(h: f64, steps: usize) -> CliResult<PathSampler> {
    Ok(PathSampler::new(
        &CovarianceModel::fbm(h, 1.0)?,
        uniform(steps)?,
        SamplingMethod::Circulant,
    )?)
}

/// Runs criterion `id` (1 to 11).
pub fn run_criterion(id: u8, seed: u64) -> CliResult<CriterionResult> {
    let s = sub_seed(seed, id);
    match id {
        1 => covariance_exactness(s),
        2 => gls_identity(s),
        3 => lambda_closed_form(),
        4 => integral_bound(s),
        5 => replication_decay(s),
        6 => constant_claim(s),
        7 => small_deviation(s),
        8 => wiener_square_pipeline(s),
        9 => utility_closed_forms(s),
        10 => fractional_market_constants(),
        11 => holder_estimators(s),
        _ => Err(crate::error::CliError::Config(format!(
            "no criterion {id}; criterion 12 compares two suite runs"
        ))),
    }
}

/// Criteria 1 to 11 with the wall-clock seconds each took.
pub fn run_suite(seed: u64) -> CliResult<Vec<(CriterionResult, f64)>> {
    (1..CRITERIA)
        .map(|id| {
            let start = Instant::now();
            let r = run_criterion(id, seed)?;
            log::info!("{}", r.line());
            Ok((r, start.elapsed().as_secs_f64()))
        })
        .collect()
}

/// Criterion 12: two suite runs must serialize to identical bytes.
pub fn determinism(
    first: &[CriterionResult],
    second: &[CriterionResult],
) -> CliResult<CriterionResult> {
    let a = serde_json::to_string(first)
        .map_err(|e| crate::error::CliError::Serialize(e.to_string()))?;
    let b = serde_json::to_string(second)
        .map_err(|e| crate::error::CliError::Serialize(e.to_string()))?;
    let differing =
        a.bytes().zip(b.bytes()).filter(|(x, y)| x != y).count() + a.len().abs_diff(b.len());
    Ok(CriterionResult::new(
        12,
        "determinism: two runs with one seed give identical reports",
        vec![Metric::count("differing report bytes", differing, 0)],
        vec![format!("{} report bytes compared", a.len())],
    ))
}

/// Every empirical covariance entry of fBm on 64 uniform points lies within 3 SE.
fn covariance_exactness(seed: u64) -> CliResult<CriterionResult> {
    let mut metrics = Vec::new();
    let mut notes = Vec::new();
    for (k, h) in [0.6, 0.7, 0.8].into_iter().enumerate() {
        let model = CovarianceModel::fbm(h, 1.0)?;
        let sampler = fbm_sampler(h, 64)?;
        let paths = sampler.sample_many(seed + k as u64, 10_000);
        let t = sampler.grid().times().to_vec();
        let pairs: Vec<(usize, usize)> = (1..t.len())
            .flat_map(|i| (1..=i).map(move |j| (i, j)))
            .collect();
        let z: Vec<f64> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let prods: Vec<f64> = paths.iter().map(|p| p.values[i] * p.values[j]).collect();
                let e = estimate(&prods);
                let exact = model.covariance(t[i], t[j]).unwrap_or(f64::NAN);
                (e.mean - exact).abs() / e.se
            })
            .collect();
        let outside = z.iter().filter(|v| v.is_nan() || **v > 3.0).count();
        let worst = z.iter().cloned().fold(0.0, f64::max);
        metrics.push(Metric::count(
            format!("H = {h}: entries outside 3 SE"),
            outside,
            0,
        ));
        metrics.push(
            Metric::new(
                format!("H = {h}: largest |error|/SE"),
                worst,
                3.0,
                0.0,
                Rule::AtMost,
            )
            .info(),
        );
        notes.push(format!("H = {h}: {} entries, 10000 paths", pairs.len()));
    }
    Ok(CriterionResult::new(
        1,
        "fBm simulation reproduces the covariance",
        metrics,
        notes,
    ))
}

/// Left Riemann sums on a mesh refined `m` and `2m` times, combined so that the
/// first-order bias cancels.
fn riemann_oracle(f: &PathFn, g: &PathFn, knots: &[f64], m: usize) -> f64 {
    let refine = |m: usize| -> Vec<f64> {
        let mut pts: Vec<f64> = knots
            .windows(2)
            .flat_map(|w| (0..m).map(move |k| w[0] + (w[1] - w[0]) * k as f64 / m as f64))
            .collect();
        pts.push(knots[knots.len() - 1]);
        pts
    };
    2.0 * riemann_sum(f, g, &refine(2 * m)) - riemann_sum(f, g, &refine(m))
}

/// `∫_0^1 g dg = ½(g(1)² − g(0)²)` for fBm paths.
fn gls_identity(seed: u64) -> CliResult<CriterionResult> {
    let sampler = fbm_sampler(0.7, 64)?;
    let order = FracOrder::new(0.4)?;
    let rows: Vec<(f64, f64)> = (0..50u64)
        .into_par_iter()
        .map(|k| -> CliResult<(f64, f64)> {
            let pl = PiecewiseLinear::from_path(&sampler.sample(seed, k));
            let g = PathFn::Linear(pl.clone());
            let v = gls_integral(&g, &g, order, 0.0, 1.0)?;
            let oracle = riemann_oracle(&g, &g, pl.knots(), 64);
            let closed = 0.5 * (pl.values()[64].powi(2) - pl.values()[0].powi(2));
            Ok((
                (v - oracle).abs() / oracle.abs(),
                (v - closed).abs() / closed.abs(),
            ))
        })
        .collect::<CliResult<_>>()?;
    let worst = rows.iter().map(|r| r.0).fold(0.0, f64::max);
    let worst_closed = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(CriterionResult::new(
        2,
        "generalized Lebesgue-Stieltjes integral of a path against itself",
        vec![
            Metric::new(
                "max relative error against the Riemann-sum oracle",
                worst,
                1e-3,
                0.0,
                Rule::AtMost,
            ),
            Metric::new(
                "max relative error against the closed form",
                worst_closed,
                1e-3,
                0.0,
                Rule::AtMost,
            )
            .info(),
        ],
        vec!["50 fBm paths, H = 0.7, 64 cells, alpha = 0.4".into()],
    ))
}

/// `Λ_α` of a linear path and the weighted norm of a constant.
fn lambda_closed_form() -> CliResult<CriterionResult> {
    let order = FracOrder::new(0.4)?;
    let line = PiecewiseLinear::new(vec![0.0, 1.0], vec![0.0, 1.0])?;
    let lam = lambda_alpha(&line, order).value;
    let mut metrics = vec![Metric::new(
        "Lambda of x on [0, 1]",
        lam,
        1.0 / gamma(1.4),
        1e-4,
        Rule::RelErr,
    )];
    for t in [1.0, 2.0] {
        let n = weighted_norm(&PathFn::constant(1.0), order, 0.0, t)?.value;
        metrics.push(Metric::new(
            format!("norm of 1 on [0, {t}]"),
            n,
            t.powf(0.6) / 0.6,
            1e-4,
            Rule::RelErr,
        ));
    }
    Ok(CriterionResult::new(
        3,
        "closed forms of Lambda_alpha and the weighted norm",
        metrics,
        vec![],
    ))
}

/// `|∫ f dg| ≤ Λ_α(g) ‖f‖_α` for random polynomials against fBm paths.
fn integral_bound(seed: u64) -> CliResult<CriterionResult> {
    let sampler = fbm_sampler(0.7, 64)?;
    let order = FracOrder::new(0.4)?;
    let checks: Vec<(f64, bool)> = (0..100u64)
        .into_par_iter()
        .map(|k| -> CliResult<(f64, bool)> {
            let mut rng = path_rng(seed ^ 0x5eed, k);
            let degree = rng.gen_range(0..=3);
            let coeffs: Vec<f64> = (0..=degree).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let g = PiecewiseLinear::from_path(&sampler.sample(seed, k));
            let b = verify_bound(&PathFn::Polynomial(coeffs), &g, order, 1.0)?;
            Ok((if b.rhs > 0.0 { b.lhs / b.rhs } else { 0.0 }, b.holds))
        })
        .collect::<CliResult<_>>()?;
    let violations = checks.iter().filter(|c| !c.1).count();
    let tightest = checks.iter().map(|c| c.0).fold(0.0, f64::max);
    Ok(CriterionResult::new(
        4,
        "integral bound by Lambda_alpha times the weighted norm",
        vec![
            Metric::count("violations in 100 pairs", violations, 0),
            Metric::new("largest lhs / rhs", tightest, 1.0, 0.0, Rule::AtMost).info(),
        ],
        vec![],
    ))
}

/// Replication runs on `paths` fBm paths with `Z = G`.
fn replicate_self(
    config: &ReplicationConfig,
    seed: u64,
    paths: u64,
) -> CliResult<Vec<(Strategy, ReplicationTrace)>> {
    let grid = Arc::new(replication_grid(config, 1.0)?);
    let sampler = PathSampler::new(
        &CovarianceModel::fbm(config.h, 1.0)?,
        grid,
        SamplingMethod::Cholesky,
    )?;
    (0..paths)
        .into_par_iter()
        .map(|k| {
            let p = sampler.sample(seed, k);
            Ok(build_replicating_strategy(&p, &p.values, config)?)
        })
        .collect()
}

/// Terminal errors and last level gaps `|ξ_N − ξ_{N−1}|`.
fn terminal_and_gap(traces: &[&ReplicationTrace]) -> (f64, f64) {
    let errors: Vec<f64> = traces.iter().map(|t| t.terminal_error).collect();
    let gaps: Vec<f64> = traces
        .iter()
        .map(|t| {
            let n = t.levels.len();
            (t.levels[n - 1].target - t.levels[n - 2].target).abs()
        })
        .collect();
    (median(&errors), median(&gaps))
}

/// Share of runs whose final level reached its target.
fn last_level_achieved(traces: &[&ReplicationTrace]) -> f64 {
    traces
        .iter()
        .filter(|t| t.levels.last().is_some_and(|l| l.achieved))
        .count() as f64
        / traces.len().max(1) as f64
}

/// Achieved levels whose closing capital or running integral leaves the
/// interval between the starting capital and the target.
fn sandwich_violations(strategy: &Strategy, trace: &ReplicationTrace) -> usize {
    let tol = 1e-12;
    let mut bad = 0;
    for (l, seg) in trace.levels.iter().zip(&strategy.segments[1..]) {
        if !l.achieved {
            continue;
        }
        let (lo, hi) = (
            l.previous_target.min(l.target),
            l.previous_target.max(l.target),
        );
        if l.capital_end < lo - tol || l.capital_end > hi + tol {
            bad += 1;
        }
        let (clo, chi) = (l.capital_start.min(l.target), l.capital_start.max(l.target));
        if seg.checkpoints.iter().any(|cp| {
            let v = l.capital_start + seg.sign * cp;
            v < clo - tol || v > chi + tol
        }) {
            bad += 1;
        }
    }
    bad
}

/// Replication of `ξ = B^H(T)` with `Z = B^H`.
fn replication_decay(seed: u64) -> CliResult<CriterionResult> {
    let config = ReplicationConfig::default();
    let runs = replicate_self(&config, seed, 100)?;
    let traces: Vec<&ReplicationTrace> = runs.iter().map(|r| &r.1).collect();
    let sandwich: usize = runs.iter().map(|(s, t)| sandwich_violations(s, t)).sum();
    let (err, gap) = terminal_and_gap(&traces);
    let unbounded = runs.iter().filter(|(s, _)| !s.sup_psi.is_finite()).count();

    // Levels past N₁: sup|ψ| may grow by at most a factor 2 from one level to the next.
    let mut late_pairs = 0;
    let mut late_violations = 0;
    let mut stricter = 0;
    let mut with_case2 = 0;
    for t in &traces {
        if let Some(n1) = t.n1 {
            for w in t.levels.windows(2).filter(|w| w[0].level >= n1) {
                late_pairs += 1;
                if w[1].sup_psi > 2.0 * w[0].sup_psi {
                    late_violations += 1;
                }
            }
        }
        if let Some(first) = t
            .levels
            .iter()
            .find(|l| l.kind == fracrep_core::replication::SegmentKind::CaseII)
        {
            with_case2 += 1;
            if t.levels[t.levels.len() - 1].sup_psi <= first.sup_psi {
                stricter += 1;
            }
        }
    }
    let metrics = vec![
        Metric::count("(a) sandwich violations on achieved levels", sandwich, 0),
        Metric::new("(b) median terminal error", err, gap, 0.0, Rule::AtMost),
        Metric::new(
            "(b) share of runs with the last level achieved",
            last_level_achieved(&traces),
            1.0,
            0.0,
            Rule::AtLeast,
        )
        .info(),
        Metric::count("(c) runs with unbounded sup|psi|", unbounded, 0),
        Metric::count(
            "(c) late-level sup|psi| growth beyond factor 2",
            late_violations,
            0,
        ),
        Metric::count("(c) late level pairs checked", late_pairs, late_pairs).info(),
        Metric::new(
            "(c) share of runs with last-level sup|psi| <= first Case II sup|psi|",
            stricter as f64 / with_case2.max(1) as f64,
            1.0,
            0.0,
            Rule::AtLeast,
        )
        .info(),
    ];
    let notes = vec![
        "reference of (b) is the median of |xi_N - xi_(N-1)| over the same 100 paths".into(),
        "(b) has little margin: with theta = 1/2 the increments Z(T) - Z(t_N) and Z(t_N) - Z(t_(N-1)) \
         span intervals of equal length theta^N and have the same law, so the two medians are comparable \
         and the comparison can go either way for other seeds"
            .into(),
        "(c) N1 (first level after which every level achieves) is usually the last level, so few late pairs exist"
            .into(),
    ];
    Ok(CriterionResult::new(
        5,
        "replication of B^H(T): sandwich, decay and bounded integrand",
        metrics,
        notes,
    ))
}

/// `Z ≡ c` is reached exactly.
fn constant_claim(seed: u64) -> CliResult<CriterionResult> {
    let config = ReplicationConfig::default();
    let grid = Arc::new(replication_grid(&config, 1.0)?);
    let sampler = PathSampler::new(
        &CovarianceModel::fbm(config.h, 1.0)?,
        grid,
        SamplingMethod::Cholesky,
    )?;
    let errors: Vec<f64> = (0..100u64)
        .into_par_iter()
        .map(|k| {
            let p = sampler.sample(seed, k);
            let target = vec![1.7; p.values.len()];
            Ok(build_replicating_strategy(&p, &target, &config)?
                .1
                .terminal_error)
        })
        .collect::<CliResult<_>>()?;
    let missed = errors.iter().filter(|e| e.is_nan() || **e > 1e-6).count();
    Ok(CriterionResult::new(
        6,
        "constant claim is replicated exactly",
        vec![
            Metric::count("paths with terminal error above 1e-6", missed, 0),
            Metric::new(
                "largest terminal error",
                errors.iter().cloned().fold(0.0, f64::max),
                1e-6,
                0.0,
                Rule::AtMost,
            )
            .info(),
        ],
        vec!["Z = 1.7 on 100 fBm paths".into()],
    ))
}

/// Small-deviation bound against exact and Monte Carlo probabilities.
fn small_deviation(seed: u64) -> CliResult<CriterionResult> {
    let bound2 = small_deviation_bound(&DMatrix::identity(2, 2), 1.0)?;
    let exact2 = 1.0 - (-0.5f64).exp();

    let config = ReplicationConfig::default();
    let n = 8;
    let t = fracrep_core::replication::level_grid(config.theta, 1.0, n + 1)?;
    let (a, b) = (t[n - 1], t[n]);
    let pts: Vec<f64> = (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect();
    let model = CovarianceModel::fbm(config.h, 1.0)?;
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            cov[(i, j)] = model.increment_covariance(pts[i], pts[i + 1], pts[j], pts[j + 1])?;
        }
    }
    let x = 0.5 * cov.trace();
    let bound = small_deviation_bound(&cov, x)?;
    let mut times = vec![0.0];
    times.extend(&pts);
    let grid = Arc::new(SampleGrid::from_times(times, GridKind::Custom)?);
    let sampler = PathSampler::new(&model, grid, SamplingMethod::Cholesky)?;
    let hits: Vec<f64> = (0..4000u64)
        .into_par_iter()
        .map(|k| {
            let v = sampler.sample(seed, k).values;
            let q: f64 = v[1..].windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
            if q <= x {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let mc = estimate(&hits);
    Ok(CriterionResult::new(
        7,
        "small-deviation bound dominates the probability",
        vec![
            Metric::new("chi-square bound", bound2, 0.60653, 1e-5, Rule::AbsErr),
            Metric::new(
                "chi-square exact probability",
                exact2,
                0.39347,
                1e-5,
                Rule::AbsErr,
            ),
            Metric::new(
                "chi-square bound minus exact",
                bound2 - exact2,
                0.0,
                0.0,
                Rule::AtLeast,
            ),
            Metric::new(
                "fBm n = 8 Monte Carlo probability",
                mc.mean,
                bound,
                3.0 * mc.se,
                Rule::AtMost,
            ),
        ],
        vec![format!(
            "4000 paths, Monte Carlo SE {:.3e}, x = half the mean square sum",
            mc.se
        )],
    ))
}

/// `ξ = W(T)²` through its closed-form state on joint paths.
fn wiener_square_pipeline(seed: u64) -> CliResult<CriterionResult> {
    let claim = claim_library("terminal_wiener_squared", 1.0)?;
    let config = ReplicationConfig {
        r: claim.r,
        ..Default::default()
    };
    config.validate()?;
    let grid = Arc::new(replication_grid(&config, 1.0)?);
    let sampler = JointSampler::new(config.h, grid)?;
    let runs: Vec<(Strategy, ReplicationTrace)> = (0..100u64)
        .into_par_iter()
        .map(|k| {
            let jp = sampler.sample(seed, k);
            let z = claim.state_path(&jp);
            Ok(build_replicating_strategy(&jp.transformed, &z, &config)?)
        })
        .collect::<CliResult<_>>()?;
    let traces: Vec<&ReplicationTrace> = runs.iter().map(|r| &r.1).collect();
    let (err, gap) = terminal_and_gap(&traces);
    let sandwich: usize = runs.iter().map(|(s, t)| sandwich_violations(s, t)).sum();
    let z_err: Vec<f64> = traces.iter().map(|t| t.terminal_error).collect();
    Ok(CriterionResult::new(
        8,
        "replication of W(T)^2 through its state on joint paths",
        vec![
            Metric::new("median terminal error", err, gap, 0.0, Rule::AtMost),
            Metric::count("sandwich violations on achieved levels", sandwich, 0).info(),
            Metric::new("share of runs with the last level achieved", last_level_achieved(&traces), 1.0, 0.0, Rule::AtLeast)
                .info(),
            Metric::new("mean terminal error", estimate(&z_err).mean, gap, 0.0, Rule::AtMost).info(),
        ],
        vec![
            "reference is the median of |xi_N - xi_(N-1)| over the same 100 joint paths".into(),
            "the state W^2 + T - t has increments over [t_N, T] and [t_(N-1), t_N] of comparable size, \
             as in criterion 5, and the terminal level is usually left open"
                .into(),
        ],
    ))
}

fn density_samples(
    theta0: f64,
    n: usize,
    seed: u64,
) -> CliResult<(DensityProcess, DensitySamples)> {
    let d = DensityProcess::new(ThetaProcess::constant(theta0));
    let s = DensitySamples::draw(&d, uniform(8)?, n, seed)?;
    Ok((d, s))
}

/// Gaussian closed forms of the utility problems.
fn utility_closed_forms(seed: u64) -> CliResult<CriterionResult> {
    let mut metrics = Vec::new();
    let (d, s) = density_samples(1.0, 10_000, seed)?;
    let mut exp = UtilityProblem::new(
        UtilityFunction::exponential(1.0)?,
        0.0,
        d.clone(),
        s.clone(),
        false,
    )?;
    solve_budget_constant(&mut exp)?;
    let prof = optimal_profile(&exp)?;
    let eu = prof.expected_utility;
    metrics.push(Metric::with_se(
        "exponential E u(X*)",
        eu.mean,
        eu.se,
        1.0 - (-0.5f64).exp(),
        3.0,
    ));
    let h = relative_entropy(&s.phi);
    metrics.push(Metric::with_se("relative entropy", h.mean, h.se, 0.5, 3.0));
    metrics.push(Metric::with_se(
        "budget E[phi X*]",
        prof.budget.mean,
        prof.budget.se,
        0.0,
        3.0,
    ));

    let gamma_u = 0.5;
    let mut pow = UtilityProblem::new(
        UtilityFunction::power(gamma_u)?,
        1.0,
        d.clone(),
        s.clone(),
        false,
    )?;
    solve_budget_constant(&mut pow)?;
    let dd = power_profile_constant(&pow.samples.phi, gamma_u);
    let d_exact = (gamma_u / (2.0 * (1.0 - gamma_u).powi(2))).exp();
    metrics.push(Metric::with_se(
        "power utility d",
        dd.mean,
        dd.se,
        d_exact,
        3.0,
    ));

    let mut log = UtilityProblem::new(UtilityFunction::Log, 2.0, d, s, false)?;
    solve_budget_constant(&mut log)?;
    metrics.push(Metric::new(
        "log utility c",
        log.c.unwrap_or(f64::NAN),
        0.5,
        1e-12,
        Rule::RelErr,
    ));
    Ok(CriterionResult::new(
        9,
        "utility maximization closed forms",
        metrics,
        vec!["theta = 1, T = 1, 10000 paths; exponential beta = 1, w = 0; power gamma = 0.5, w = 1; log w = 2".into()],
    ))
}

/// Constants and diagnostics of the fractional Black-Scholes market.
fn fractional_market_constants() -> CliResult<CriterionResult> {
    let mut metrics = Vec::new();
    // Γ(0.75), Γ(0.5) = √π and Γ(1.25) from tables.
    let (g34, g12, g54) = (
        1.225_416_702_465_177,
        std::f64::consts::PI.sqrt(),
        0.906_402_477_055_477,
    );
    let c1 = hidden_semimartingale_constants(0.75)?.c1;
    metrics.push(Metric::new(
        "C1(0.75)",
        c1,
        (g34 / (1.5 * g12 * g54)).sqrt() / 0.75,
        1e-10,
        Rule::RelErr,
    ));
    for h in [0.6, 0.75, 0.9] {
        let r = kernel_drift_integral(h, 0.5)? / kernel_drift_integral(h, 1.0)?;
        metrics.push(Metric::new(
            format!("kernel scaling ratio, H = {h}"),
            r,
            2f64.powf(h - 1.5),
            1e-3,
            Rule::RelErr,
        ));
    }
    let mut meets = 0;
    let mut meets_rigorous = 0;
    let mut worst = f64::INFINITY;
    for h in [0.6, 0.75, 0.9] {
        for eps in [0.05, 0.1, 0.2] {
            for t in [0.5, 1.0, 2.0] {
                let v = prelimit_variance(h, eps, t)?;
                meets += usize::from(v.meets_stated_bound());
                meets_rigorous += usize::from(v.quadrature >= v.rigorous_bound);
                worst = worst.min(v.quadrature / v.stated_bound);
            }
        }
    }
    metrics.push(Metric::count(
        "grid points with variance >= stated bound",
        meets,
        27,
    ));
    let v = prelimit_variance(0.75, 0.1, 1.0)?;
    let formula = 0.1f64.powf(-0.5) * 2.0 * (0.1f64.powf(-0.5) - 1.1f64.powf(-0.5));
    metrics.push(Metric::new(
        "stated bound at (0.75, 0.1, 1)",
        v.stated_bound,
        formula,
        1e-6,
        Rule::AbsErr,
    ));
    metrics.push(
        Metric::count(
            "grid points with variance >= corrected bound",
            meets_rigorous,
            27,
        )
        .info(),
    );
    metrics.push(
        Metric::new(
            "smallest variance / stated bound",
            worst,
            1.0,
            0.0,
            Rule::AtLeast,
        )
        .info(),
    );
    Ok(CriterionResult::new(
        10,
        "fractional market constants and prelimit variance",
        metrics,
        vec![
            format!(
                "at (0.75, 0.1, 1) the variance is {:.4} while the stated bound is {:.4}",
                v.quadrature, v.stated_bound
            ),
            "the stated bound eps^(1-2H) t/(2-2H) (eps^(2H-2) - (t+eps)^(2H-2)) carries a spurious factor t \
             and lacks (H-1/2)^2; bounding the inner kernel integral by (t+eps)^(H-1/2) eps^(H-1/2)/(H-1/2) \
             gives (H-1/2)^2 eps^(1-2H)/(2-2H) (eps^(2H-2) - (t+eps)^(2H-2)), which holds on all 27 points"
                .into(),
        ],
    ))
}

fn holder_median(paths: &[GaussianPath], j_min: u32, j_max: u32) -> CliResult<f64> {
    let v: Vec<f64> = paths
        .iter()
        .map(|p| Ok(holder_exponent_estimate(p, j_min, j_max)?.exponent))
        .collect::<CliResult<_>>()?;
    Ok(median(&v))
}

/// Hölder estimates of W, fBm and the library claims' states.
fn holder_estimators(seed: u64) -> CliResult<CriterionResult> {
    let mut metrics = Vec::new();
    for (k, h) in [0.5, 0.8].into_iter().enumerate() {
        let paths = fbm_sampler(h, 4096)?.sample_many(seed + k as u64, 100);
        let m = holder_median(&paths, 4, 12)?;
        metrics.push(Metric::new(
            format!("median estimate for H = {h}"),
            m,
            h,
            0.05,
            Rule::AbsErr,
        ));
    }
    let wiener = fbm_sampler(0.5, 4096)?.sample_many(seed + 7, 20);
    for name in [
        "constant(1)",
        "terminal_wiener",
        "terminal_wiener_squared",
        "exponential_martingale(1)",
    ] {
        let claim = claim_library(name, 1.0)?;
        let states: Vec<GaussianPath> = wiener
            .iter()
            .map(|w| {
                let jp = JointPath {
                    wiener: w.clone(),
                    transformed: w.clone(),
                };
                GaussianPath {
                    values: claim.state_path(&jp),
                    ..w.clone()
                }
            })
            .collect();
        let m = holder_median(&states, 4, 12)?;
        let floor = holder_of_ito_integral(claim.theta.p)?;
        metrics.push(Metric::new(
            format!("{name}: median estimate vs 1/2 - 1/(2p)"),
            m,
            floor,
            0.05,
            Rule::AtLeast,
        ));
    }
    let claim = claim_library("fbm_terminal(0.7)", 1.0)?;
    let joint = JointSampler::new(0.7, uniform(256)?)?;
    let states: Vec<GaussianPath> = (0..20u64)
        .map(|k| {
            let jp = joint.sample(seed + 11, k);
            GaussianPath {
                values: claim.state_path(&jp),
                ..jp.wiener
            }
        })
        .collect();
    let m = holder_median(&states, 3, 8)?;
    let floor = holder_of_ito_integral(claim.theta.p)?;
    metrics.push(Metric::new(
        "fbm_terminal(0.7): median estimate vs 1/2 - 1/(2p)",
        m,
        floor,
        0.05,
        Rule::AtLeast,
    ));
    Ok(CriterionResult::new(
        11,
        "Hölder exponent estimates",
        metrics,
        vec![
            "100 paths on 4096 cells for W and fBm; 20 paths per claim, fbm_terminal on 256 cells"
                .into(),
        ],
    ))
}
