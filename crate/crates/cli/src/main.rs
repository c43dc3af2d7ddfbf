use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fracrep_cli::commands::{run, Experiment};
use fracrep_cli::config::ExperimentConfig;
use fracrep_cli::error::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "fracrep",
    version,
    about = "Pathwise fractional calculus experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Sample Gaussian paths and check their covariance.
    Simulate,
    /// Compare integrals against Riemann sums and check the integral bound.
    Integrate,
    /// Build replicating strategies along sampled paths.
    Replicate,
    /// Solve an expected-utility problem by Monte Carlo.
    Utility,
    /// Run the acceptance suite.
    Verify,
    /// Print the effective configuration as TOML.
    ShowConfig,
}

fn execute(cli: &Cli) -> CliResult<bool> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let experiment = match cli.command {
        Command::Simulate => Experiment::Simulate,
        Command::Integrate => Experiment::Integrate,
        Command::Replicate => Experiment::Replicate,
        Command::Utility => Experiment::Utility,
        Command::Verify => Experiment::Verify,
        Command::ShowConfig => {
            print!("{}", config.to_toml()?);
            return Ok(true);
        }
    };
    let record = run(experiment, &config, &cli.out)?;
    if !cli.quiet {
        for c in &record.criteria {
            println!("{}", c.line());
        }
        for m in record.metrics.iter() {
            let flag = if m.informational {
                "info"
            } else if m.pass {
                "pass"
            } else {
                "FAIL"
            };
            println!(
                "[{flag}] {} = {:.6e} (reference {:.6e})",
                m.name, m.value, m.reference
            );
        }
        for f in &record.failures {
            println!("[FAIL] {f}");
        }
        println!(
            "{}: {} ({})",
            experiment.name(),
            if record.pass { "pass" } else { "fail" },
            cli.out.display()
        );
    }
    Ok(record.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
