//! Subcommands of the harness. Each validates its configuration before any
//! computation, writes its outputs under the output directory and returns the
//! run report. Numbers are written with 17 significant digits so that equal
//! seeds give byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use fracrep_core::fractional_calculus::{gls_integral, riemann_sum, verify_bound};
use fracrep_core::martingale_tools::claim_library;
use fracrep_core::path_simulation::{JointSampler, PathSampler};
use fracrep_core::replication::{build_replicating_strategy, replication_grid, ReplicationTrace};
use fracrep_core::stats::{estimate, median};
use fracrep_core::utility_max::{
    optimal_profile, relative_entropy, solve_budget_constant, DensitySamples,
};
use fracrep_core::{
    CovarianceModel, DensityProcess, FracOrder, PathFn, PiecewiseLinear, SampleGrid,
    SamplingMethod, UtilityProblem,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::acceptance;
use crate::config::{ExperimentConfig, MethodSpec};
use crate::error::{CliError, CliResult};
use crate::report::{Metric, ReportRecord, Rule};

/// Harness experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    Integrate,
    Replicate,
    Utility,
    Verify,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Integrate => "integrate",
            Experiment::Replicate => "replicate",
            Experiment::Utility => "utility",
            Experiment::Verify => "verify",
        }
    }
}

/// Writes files into the output directory through a temporary file and a
/// rename, so an interrupted run never leaves a truncated file behind.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root.display().to_string(), e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let path = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.tmp"));
        let shown = path.display().to_string();
        std::fs::write(&tmp, contents).map_err(|e| CliError::io(shown.clone(), e))?;
        std::fs::rename(&tmp, &path).map_err(|e| CliError::io(shown, e))?;
        self.written.push(name.to_string());
        Ok(())
    }
}

/// Wall-clock record kept apart from the deterministic report.
#[derive(Debug, Serialize)]
struct Timing<'a> {
    experiment: &'a str,
    seconds: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    criteria: Vec<(u8, f64)>,
}

fn to_json<T: Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Serialize(e.to_string()))
}

/// Validates, runs and writes `experiment`, ending with `<name>.json` and `timing.json`.
pub fn run(
    experiment: Experiment,
    config: &ExperimentConfig,
    out: &Path,
) -> CliResult<ReportRecord> {
    match experiment {
        Experiment::Simulate => config.validate_simulate()?,
        Experiment::Integrate => config.validate_integrate()?,
        Experiment::Replicate => config.validate_replicate()?,
        Experiment::Utility => config.validate_utility()?,
        Experiment::Verify => {}
    }
    let start = Instant::now();
    let mut dir = OutputDir::create(out)?;
    let mut criteria_seconds = Vec::new();
    let outcome = match experiment {
        Experiment::Simulate => simulate(config, &mut dir),
        Experiment::Integrate => integrate(config, &mut dir),
        Experiment::Replicate => replicate(config, &mut dir),
        Experiment::Utility => utility(config, &mut dir),
        Experiment::Verify => verify(config.seed, &mut dir, &mut criteria_seconds),
    };
    let mut record = outcome?;
    record.outputs = std::mem::take(&mut dir.written);
    record.outputs.push(format!("{}.json", experiment.name()));
    record.finish();
    dir.write(&format!("{}.json", experiment.name()), &record.to_json()?)?;
    let timing = Timing {
        experiment: experiment.name(),
        seconds: start.elapsed().as_secs_f64(),
        criteria: criteria_seconds,
    };
    dir.write("timing.json", &to_json(&timing)?)?;
    Ok(record)
}

fn simulate(config: &ExperimentConfig, dir: &mut OutputDir) -> CliResult<ReportRecord> {
    let c = &config.simulate;
    let mut record = ReportRecord::new(
        "simulate",
        &serde_json::json!({"seed": config.seed, "simulate": c}),
    )?;
    let model = c.model.model(c.horizon)?;
    let grid = Arc::new(SampleGrid::uniform(c.horizon, c.steps)?);
    let method = match c.method {
        MethodSpec::Auto if model.is_fbm().is_some() => SamplingMethod::Circulant,
        MethodSpec::Auto | MethodSpec::Cholesky => SamplingMethod::Cholesky,
        MethodSpec::Circulant => SamplingMethod::Circulant,
    };
    let paths = PathSampler::new(&model, grid.clone(), method)?.sample_many(config.seed, c.paths);
    let t = grid.times();

    let mut csv = String::from("time");
    for k in 0..paths.len() {
        let _ = write!(csv, ",path_{k}");
    }
    csv.push('\n');
    for (i, ti) in t.iter().enumerate() {
        let _ = write!(csv, "{ti:.17e}");
        for p in &paths {
            let _ = write!(csv, ",{:.17e}", p.values[i]);
        }
        csv.push('\n');
    }
    dir.write("paths.csv", &csv)?;

    // Centered covariance on every pair of nonzero grid points.
    let pairs: Vec<(usize, usize)> = (1..t.len())
        .flat_map(|i| (1..=i).map(move |j| (i, j)))
        .collect();
    let z: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (mi, mj) = (model.mean(t[i]), model.mean(t[j]));
            let prods: Vec<f64> = paths
                .iter()
                .map(|p| (p.values[i] - mi) * (p.values[j] - mj))
                .collect();
            let e = estimate(&prods);
            let exact = model.covariance(t[i], t[j]).unwrap_or(f64::NAN);
            if e.se > 0.0 {
                (e.mean - exact).abs() / e.se
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let within = z.iter().filter(|v| **v <= 3.0).count();
    let share = if pairs.is_empty() {
        1.0
    } else {
        within as f64 / pairs.len() as f64
    };
    // Standard errors from fewer than 100 paths are too noisy to judge by.
    let check = Metric::new(
        "share of covariance entries within 3 SE",
        share,
        0.95,
        0.0,
        Rule::AtLeast,
    );
    record
        .metrics
        .push(if c.paths >= 100 { check } else { check.info() });
    record.metrics.push(
        Metric::new(
            "largest |error|/SE",
            z.iter().cloned().fold(0.0, f64::max),
            3.0,
            0.0,
            Rule::AtMost,
        )
        .info(),
    );
    record
        .metrics
        .push(Metric::count("covariance entries checked", pairs.len(), pairs.len()).info());
    Ok(record)
}

/// Left Riemann sums refined 64 and 128 times per cell, extrapolated.
fn riemann_oracle(f: &PathFn, g: &PathFn, knots: &[f64]) -> f64 {
    let refine = |m: usize| -> Vec<f64> {
        let mut pts: Vec<f64> = knots
            .windows(2)
            .flat_map(|w| (0..m).map(move |k| w[0] + (w[1] - w[0]) * k as f64 / m as f64))
            .collect();
        pts.push(knots[knots.len() - 1]);
        pts
    };
    2.0 * riemann_sum(f, g, &refine(128)) - riemann_sum(f, g, &refine(64))
}

fn integrate(config: &ExperimentConfig, dir: &mut OutputDir) -> CliResult<ReportRecord> {
    let c = &config.integrate;
    let mut record = ReportRecord::new(
        "integrate",
        &serde_json::json!({"seed": config.seed, "integrate": c}),
    )?;
    let grid = Arc::new(SampleGrid::uniform(1.0, c.steps)?);
    let sampler = PathSampler::new(
        &CovarianceModel::fbm(c.h, 1.0)?,
        grid,
        SamplingMethod::Circulant,
    )?;
    let order = FracOrder::new(c.alpha)?;
    let f = PathFn::Polynomial(c.integrand.clone());
    let rows: Vec<[f64; 7]> = (0..c.paths as u64)
        .into_par_iter()
        .map(|k| -> CliResult<[f64; 7]> {
            let pl = PiecewiseLinear::from_path(&sampler.sample(config.seed, k));
            let g = PathFn::Linear(pl.clone());
            let fg = gls_integral(&f, &g, order, 0.0, 1.0)?;
            let fg_oracle = riemann_oracle(&f, &g, pl.knots());
            let gg = gls_integral(&g, &g, order, 0.0, 1.0)?;
            let v = pl.values();
            let gg_closed = 0.5 * (v[v.len() - 1].powi(2) - v[0].powi(2));
            let b = verify_bound(&f, &pl, order, 1.0)?;
            Ok([
                fg,
                fg_oracle,
                gg,
                gg_closed,
                b.lhs,
                b.rhs,
                if b.holds { 1.0 } else { 0.0 },
            ])
        })
        .collect::<CliResult<_>>()?;

    let mut csv = String::from(
        "path,gls_f_dg,riemann_f_dg,gls_g_dg,closed_g_dg,bound_lhs,bound_rhs,bound_holds\n",
    );
    for (k, r) in rows.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{k},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
            r[0],
            r[1],
            r[2],
            r[3],
            r[4],
            r[5],
            r[6] == 1.0
        );
    }
    dir.write("integrate.csv", &csv)?;

    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    let fg_err = rows.iter().map(|r| rel(r[0], r[1])).fold(0.0, f64::max);
    let gg_err = rows.iter().map(|r| rel(r[2], r[3])).fold(0.0, f64::max);
    let violations = rows.iter().filter(|r| r[6] != 1.0).count();
    record.metrics.push(Metric::new(
        "max relative error of int f dg against Riemann sums",
        fg_err,
        1e-3,
        0.0,
        Rule::AtMost,
    ));
    record.metrics.push(Metric::new(
        "max relative error of int g dg against the closed form",
        gg_err,
        1e-3,
        0.0,
        Rule::AtMost,
    ));
    record
        .metrics
        .push(Metric::count("integral bound violations", violations, 0));
    Ok(record)
}

fn replicate(config: &ExperimentConfig, dir: &mut OutputDir) -> CliResult<ReportRecord> {
    let c = &config.replicate;
    let rc = &c.replication;
    let mut record = ReportRecord::new(
        "replicate",
        &serde_json::json!({"seed": config.seed, "replicate": c}),
    )?;
    let grid = Arc::new(replication_grid(rc, c.horizon)?);
    let traces: Vec<ReplicationTrace> = if c.target == "self" {
        let sampler = PathSampler::new(
            &CovarianceModel::fbm(rc.h, c.horizon)?,
            grid,
            SamplingMethod::Cholesky,
        )?;
        (0..c.paths as u64)
            .into_par_iter()
            .map(|k| {
                let p = sampler.sample(config.seed, k);
                Ok(build_replicating_strategy(&p, &p.values, rc)?.1)
            })
            .collect::<CliResult<_>>()?
    } else {
        let claim = claim_library(&c.target, c.horizon)?;
        let sampler = JointSampler::new(rc.h, grid)?;
        (0..c.paths as u64)
            .into_par_iter()
            .map(|k| {
                let jp = sampler.sample(config.seed, k);
                let z = claim.state_path(&jp);
                Ok(build_replicating_strategy(&jp.transformed, &z, rc)?.1)
            })
            .collect::<CliResult<_>>()?
    };

    let mut csv = String::from(
        "path,level,t_start,t_end,target,capital_start,capital_end,achieved,sup_psi,kind\n",
    );
    for (k, tr) in traces.iter().enumerate() {
        for l in &tr.levels {
            let _ = writeln!(
                csv,
                "{k},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e},{:?}",
                l.level,
                l.t_start,
                l.t_end,
                l.target,
                l.capital_start,
                l.capital_end,
                l.achieved,
                l.sup_psi,
                l.kind
            );
        }
    }
    dir.write("trace.csv", &csv)?;

    let errors: Vec<f64> = traces.iter().map(|t| t.terminal_error).collect();
    let gaps: Vec<f64> = traces
        .iter()
        .filter(|t| t.levels.len() >= 2)
        .map(|t| {
            let n = t.levels.len();
            (t.levels[n - 1].target - t.levels[n - 2].target).abs()
        })
        .collect();
    let sup: Vec<f64> = traces
        .iter()
        .map(|t| t.levels.iter().map(|l| l.sup_psi).fold(0.0, f64::max))
        .collect();
    let achieved = traces
        .iter()
        .map(|t| t.levels.iter().filter(|l| l.achieved).count())
        .sum::<usize>();
    let levels = traces.iter().map(|t| t.levels.len()).sum::<usize>();
    let cross = traces
        .iter()
        .map(|t| t.max_cross_check_error)
        .fold(0.0, f64::max);

    record.metrics.push(Metric::count(
        "paths with unbounded sup|psi|",
        sup.iter().filter(|s| !s.is_finite()).count(),
        0,
    ));
    record.metrics.push(Metric::new(
        "largest pathwise cross-check relative error",
        cross,
        1e-3,
        0.0,
        Rule::AtMost,
    ));
    if !gaps.is_empty() {
        record.metrics.push(
            Metric::new(
                "median terminal error vs median last level gap",
                median(&errors),
                median(&gaps),
                0.0,
                Rule::AtMost,
            )
            .info(),
        );
    }
    record
        .metrics
        .push(Metric::new("median sup|psi|", median(&sup), 0.0, 0.0, Rule::AtLeast).info());
    record.metrics.push(
        Metric::new(
            "share of achieved levels",
            achieved as f64 / levels.max(1) as f64,
            0.0,
            0.0,
            Rule::AtLeast,
        )
        .info(),
    );
    Ok(record)
}

#[derive(Serialize)]
struct UtilitySummary {
    c: f64,
    expected_utility: f64,
    expected_utility_se: f64,
    relative_entropy: f64,
    relative_entropy_se: f64,
    budget: f64,
    budget_se: f64,
    budget_residual: f64,
    infeasible: usize,
    iterations: usize,
}

fn utility(config: &ExperimentConfig, dir: &mut OutputDir) -> CliResult<ReportRecord> {
    let c = &config.utility;
    let mut record = ReportRecord::new(
        "utility",
        &serde_json::json!({"seed": config.seed, "utility": c}),
    )?;
    let density = DensityProcess::new(c.density.theta()?);
    let grid = Arc::new(SampleGrid::uniform(c.horizon, c.steps)?);
    let samples = DensitySamples::draw(&density, grid, c.paths, config.seed)?;
    let entropy = relative_entropy(&samples.phi);
    let mut problem = UtilityProblem::new(
        c.utility.utility()?,
        c.budget,
        density,
        samples,
        c.restricted,
    )?;
    let solution = solve_budget_constant(&mut problem)?;
    let profile = optimal_profile(&problem)?;
    if profile.utility_unbounded {
        record
            .failures
            .push("expected utility is minus infinity on the samples".into());
    }
    let summary = UtilitySummary {
        c: profile.c,
        expected_utility: profile.expected_utility.mean,
        expected_utility_se: profile.expected_utility.se,
        relative_entropy: entropy.mean,
        relative_entropy_se: entropy.se,
        budget: profile.budget.mean,
        budget_se: profile.budget.se,
        budget_residual: profile.budget_residual,
        infeasible: profile.infeasible,
        iterations: solution.iterations,
    };
    dir.write("utility_summary.json", &to_json(&summary)?)?;
    let se = profile.budget.se.max(1e-12);
    record.metrics.push(Metric::with_se(
        "budget E[phi X*]",
        profile.budget.mean,
        se,
        c.budget,
        3.0,
    ));
    record.metrics.push(Metric::new(
        "relative entropy",
        entropy.mean,
        0.0,
        3.0 * entropy.se,
        Rule::AtLeast,
    ));
    record.metrics.push(Metric::count(
        "samples with infeasible profile",
        profile.infeasible,
        0,
    ));
    record.metrics.push(
        Metric::new(
            "expected utility",
            profile.expected_utility.mean,
            0.0,
            0.0,
            Rule::AtLeast,
        )
        .info(),
    );
    Ok(record)
}

/// Runs criteria 1 to 11 twice and adds the determinism check.
fn verify(seed: u64, dir: &mut OutputDir, seconds: &mut Vec<(u8, f64)>) -> CliResult<ReportRecord> {
    let mut record = ReportRecord::new("verify", &serde_json::json!({"seed": seed}))?;
    let (first, secs): (Vec<_>, Vec<_>) = acceptance::run_suite(seed)?.into_iter().unzip();
    let second: Vec<_> = acceptance::run_suite(seed)?
        .into_iter()
        .map(|r| r.0)
        .collect();
    seconds.extend(first.iter().map(|c| c.id).zip(secs));
    let det = acceptance::determinism(&first, &second)?;
    record.criteria = first;
    record.criteria.push(det);
    let lines: String = record.criteria.iter().map(|c| c.line() + "\n").collect();
    dir.write("verify.txt", &lines)?;
    Ok(record)
}
