//! Command-line front end: solves, samples, calibrates, tests, estimates power,
//! fits and reproduces the simulation tables.

mod artifacts;
mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, Family, FitMethod};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "celldiv",
    version,
    about = "Cell-division models and a calibrated test for symmetric division"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for a stationary density and write it as CSV.
    Solve,
    /// Draw a sample from a model or a density file.
    Sample,
    /// Calibrate the multiple test for a null model.
    Calibrate,
    /// Test a sample against a calibrated null.
    Test,
    /// Estimate the rejection rate against one kernel.
    Power,
    /// Fit a model to a density.
    Fit {
        #[arg(long, value_enum)]
        method: Option<FitMethod>,
    },
    /// Reproduce one of the simulation tables (1, 3 or 5).
    ReproduceTable {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(["1", "3", "5"]))]
        table: String,
    },
}

/// Flags that override the config file.
#[derive(Debug, Args, Default)]
struct Overrides {
    /// Versioned TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (required).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Size of the worker pool.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Model family.
    #[arg(long, global = true, value_enum)]
    model: Option<Family>,
    /// Division kernel.
    #[arg(long, global = true, value_parser = ["dirac", "beta22", "uniform", "truncnorm", "mixture"])]
    kernel: Option<String>,
    /// Division-rate prefactor.
    #[arg(long = "R", global = true)]
    big_r: Option<f64>,
    /// Growth-rate prefactor.
    #[arg(long, global = true)]
    r: Option<f64>,
    /// Growth-rate exponent.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Division-rate exponent.
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Adder test case (1 to 7).
    #[arg(long, global = true)]
    case: Option<usize>,
    /// Upper end of the size grid.
    #[arg(long, global = true)]
    x_max: Option<f64>,
    /// Nodes of the size grid.
    #[arg(long, global = true)]
    n_x: Option<usize>,
    /// Upper end of the added-size grid.
    #[arg(long, global = true)]
    a_max: Option<f64>,
    /// Nodes of the added-size grid.
    #[arg(long, global = true)]
    n_a: Option<usize>,
    /// Convergence threshold of the solver.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Nominal level of the test.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Sample size.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Calibration replications.
    #[arg(long, global = true)]
    calibration_reps: Option<usize>,
    /// Replications of power and level estimates.
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Input density CSV.
    #[arg(long, global = true)]
    density: Option<PathBuf>,
    /// Input sample CSV.
    #[arg(long, global = true)]
    sample: Option<PathBuf>,
    /// Input calibration JSON.
    #[arg(long, global = true)]
    calibration: Option<PathBuf>,
    /// Disk cache for grid-search solves.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        fn set<T: Clone>(dst: &mut Option<T>, src: &Option<T>) {
            if src.is_some() {
                *dst = src.clone();
            }
        }
        set(&mut cfg.seed, &self.seed);
        set(&mut cfg.jobs, &self.jobs);
        set(&mut cfg.out, &self.out);
        set(&mut cfg.model.family, &self.model);
        set(&mut cfg.model.kernel, &self.kernel);
        set(&mut cfg.model.big_r, &self.big_r);
        set(&mut cfg.model.r, &self.r);
        set(&mut cfg.model.gamma, &self.gamma);
        set(&mut cfg.model.eta, &self.eta);
        set(&mut cfg.model.case, &self.case);
        set(&mut cfg.grid.x_max, &self.x_max);
        set(&mut cfg.grid.n_x, &self.n_x);
        set(&mut cfg.grid.a_max, &self.a_max);
        set(&mut cfg.grid.n_a, &self.n_a);
        set(&mut cfg.test.alpha, &self.alpha);
        set(&mut cfg.test.n, &self.n);
        set(&mut cfg.test.calibration_reps, &self.calibration_reps);
        set(&mut cfg.test.reps, &self.reps);
        set(&mut cfg.input.density, &self.density);
        set(&mut cfg.input.sample, &self.sample);
        set(&mut cfg.input.calibration, &self.calibration);
        set(&mut cfg.fit.cache_dir, &self.cache_dir);
        if let Some(eps) = self.eps {
            let mut s = cfg.solver();
            s.eps = eps;
            cfg.solver = Some(s);
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.overrides.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig {
            version: Some(config::CONFIG_VERSION),
            ..Default::default()
        },
    };
    cli.overrides.apply(&mut cfg);
    if let Command::Fit { method: Some(m) } = &cli.command {
        cfg.fit.method = Some(*m);
    }
    cfg.validate()?;
    if let Some(jobs) = cfg.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {jobs} workers: {e}")))?;
    }
    match &cli.command {
        Command::Solve => commands::solve(&cfg),
        Command::Sample => commands::sample(&cfg),
        Command::Calibrate => commands::calibrate(&cfg),
        Command::Test => commands::test(&cfg),
        Command::Power => commands::power(&cfg),
        Command::Fit { .. } => commands::fit(&cfg),
        Command::ReproduceTable { table } => commands::reproduce_table(&cfg, table),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
