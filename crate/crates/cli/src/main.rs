//! `compolicy`: batch estimation of composite-outcome treatment policies
//! from CSV data, bootstrap heterogeneity tests and simulation replications.
//!
//! Exit codes: 0 on success, 2 for configuration or input errors, 3 when
//! the numerics fail (singular designs, non-finite objectives).

mod commands;
mod config;
mod dataset;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "compolicy", version, about = "Composite-outcome treatment policy estimation")]
struct Cli {
    /// Flat `key = value` config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for replications and bootstrap draws.
    #[arg(long, global = true, env = "COMPOLICY_JOBS")]
    jobs: Option<usize>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a dataset from a simulation scenario.
    Simulate(SimulateArgs),
    /// Estimate the utility and clinician model from a CSV file.
    Fit(FitArgs),
    /// Fit, then test for preference heterogeneity with the parametric bootstrap.
    BootTest(BootTestArgs),
    /// Run the Monte Carlo replications behind a summary table.
    Replicate(ReplicateArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario id, e.g. S1_fixed_fixed or s1.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Comma-separated utility coefficients.
    #[arg(long)]
    theta: Option<String>,
    /// Third-outcome noise reading: additive or multiplicative.
    #[arg(long)]
    y3: Option<String>,
}

#[derive(Args, Debug)]
struct EstimatorArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    /// Comma-separated covariate columns; defaults to every other column.
    #[arg(long)]
    covariates: Option<String>,
    /// Action column, coded -1/1 or 0/1.
    #[arg(long)]
    action: Option<String>,
    /// Comma-separated outcome columns.
    #[arg(long)]
    outcomes: Option<String>,
    /// Outcomes where lower values are better.
    #[arg(long)]
    negate: Option<String>,
    /// fixed or patient.
    #[arg(long)]
    utility: Option<String>,
    #[arg(long)]
    utility_covariates: Option<String>,
    /// Comma-separated covariates of the clinician model, or `none`.
    #[arg(long)]
    behavior_covariates: Option<String>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    chain_length: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    /// Positive number or `auto`.
    #[arg(long)]
    proposal_sd: Option<String>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    estimator: EstimatorArgs,
    /// Cross-fitting folds for the observational value; 0 skips it.
    #[arg(long)]
    folds: Option<usize>,
}

#[derive(Args, Debug)]
struct BootTestArgs {
    #[command(flatten)]
    estimator: EstimatorArgs,
    #[arg(long)]
    n_boot: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// contrast or weight.
    #[arg(long)]
    perturbation: Option<String>,
    #[arg(long)]
    bandwidth: Option<f64>,
}

#[derive(Args, Debug)]
struct ReplicateArgs {
    /// T1 to T10, or POWER.
    #[arg(long)]
    table: Option<String>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    test_n: Option<usize>,
    /// Comma-separated sample sizes.
    #[arg(long)]
    sizes: Option<String>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    chain_length: Option<usize>,
    #[arg(long)]
    proposal_sd: Option<String>,
    #[arg(long)]
    n_boot: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    perturbation: Option<String>,
    #[arg(long)]
    y3: Option<String>,
}

type Flags = Vec<(&'static str, Option<String>)>;

fn text<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}

fn path(v: &Option<PathBuf>) -> Option<String> {
    v.as_ref().map(|p| p.display().to_string())
}

impl EstimatorArgs {
    fn flags(&self) -> Flags {
        vec![
            ("input", path(&self.input)),
            ("covariates", text(&self.covariates)),
            ("action", text(&self.action)),
            ("outcomes", text(&self.outcomes)),
            ("negate", text(&self.negate)),
            ("utility", text(&self.utility)),
            ("utility_covariates", text(&self.utility_covariates)),
            ("behavior_covariates", text(&self.behavior_covariates)),
            ("grid_size", text(&self.grid_size)),
            ("chain_length", text(&self.chain_length)),
            ("burn_in", text(&self.burn_in)),
            ("proposal_sd", text(&self.proposal_sd)),
        ]
    }
}

fn run(cli: Cli) -> CliResult<Vec<PathBuf>> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    }
    let mut flags: Flags = vec![("seed", text(&cli.seed)), ("out", path(&cli.out))];
    let config = cli.config.as_deref();
    match &cli.command {
        Command::Simulate(a) => {
            flags.extend([
                ("scenario", text(&a.scenario)),
                ("n", text(&a.n)),
                ("omega", text(&a.omega)),
                ("rho", text(&a.rho)),
                ("theta", text(&a.theta)),
                ("y3", text(&a.y3)),
            ]);
            let mut cfg = RunConfig::load("simulate", commands::SIMULATE_KEYS, config, flags)?;
            commands::simulate(&mut cfg)
        }
        Command::Fit(a) => {
            flags.extend(a.estimator.flags());
            flags.push(("folds", text(&a.folds)));
            let mut cfg = RunConfig::load("fit", &commands::fit_keys(), config, flags)?;
            commands::fit(&mut cfg)
        }
        Command::BootTest(a) => {
            flags.extend(a.estimator.flags());
            flags.extend([
                ("n_boot", text(&a.n_boot)),
                ("alpha", text(&a.alpha)),
                ("perturbation", text(&a.perturbation)),
                ("bandwidth", text(&a.bandwidth)),
            ]);
            let mut cfg = RunConfig::load("boot-test", &commands::boot_test_keys(), config, flags)?;
            commands::boot_test(&mut cfg)
        }
        Command::Replicate(a) => {
            flags.extend([
                ("table", text(&a.table)),
                ("reps", text(&a.reps)),
                ("test_n", text(&a.test_n)),
                ("sizes", text(&a.sizes)),
                ("grid_size", text(&a.grid_size)),
                ("chain_length", text(&a.chain_length)),
                ("proposal_sd", text(&a.proposal_sd)),
                ("n_boot", text(&a.n_boot)),
                ("alpha", text(&a.alpha)),
                ("perturbation", text(&a.perturbation)),
                ("y3", text(&a.y3)),
            ]);
            let mut cfg = RunConfig::load("replicate", commands::REPLICATE_KEYS, config, flags)?;
            commands::replicate(&mut cfg)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(paths) => {
            for p in paths {
                eprintln!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
