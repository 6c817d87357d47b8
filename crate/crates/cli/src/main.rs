//! `enroll-opt`: enrollment forecasting, cap analysis, and cost-optimal site
//! allocation from a JSON study configuration.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 configuration or usage
//! error, 3 unreachable target, 4 infeasible target, 5 search space above the
//! dimension ceiling.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use enroll_core::design::DEFAULT_DIM_CEILING;
use enroll_core::forecast::PosMethod;

use enroll_opt::commands::{self, MethodChoice, OptimizeArgs};
use enroll_opt::config::{ConfigError, StudyConfig};
use enroll_opt::CliError;

const CONFIG_HELP: &str = "Study configuration (JSON). Monthly rates (rate.mean_per_month) are \
converted to daily rates with a fixed factor of 30 days per month.";

#[derive(Debug, Parser)]
#[command(
    name = "enroll-opt",
    version,
    about = "Poisson-gamma enrollment forecasting and cost-optimal site allocation",
    after_help = "Rates given per month are converted with 30 days/month.\n\
                  Set ENROLL_OPT_THREADS to bound the worker threads (0 = all cores).\n\
                  Exit codes: 0 ok, 1 I/O failure, 2 config error, 3 unreachable target, \
                  4 infeasible target, 5 dimension ceiling exceeded."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum MethodArg {
    Convolution,
    Normal,
}

impl From<MethodArg> for PosMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Convolution => PosMethod::Convolution,
            MethodArg::Normal => PosMethod::Normal,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-day enrollment forecast (forecast.csv) and completion summary
    /// (forecast_summary.json).
    Forecast {
        #[arg(help = CONFIG_HELP)]
        config: PathBuf,
        /// How the global count law is evaluated.
        #[arg(long, value_enum, default_value = "convolution")]
        method: MethodArg,
        /// Level of the central predictive interval.
        #[arg(long, default_value_t = 0.9)]
        q: f64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Flags capped countries whose cap is likely to bind before the study
    /// completes (cap_impact.csv, cap_impact.json).
    CapImpact {
        #[arg(help = CONFIG_HELP)]
        config: PathBuf,
        /// Quantile level compared between time-to-cap and completion time.
        #[arg(long, default_value_t = 0.9)]
        q: f64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Minimum-cost site allocation reaching a success probability
    /// (optimize.json).
    Optimize {
        #[arg(help = CONFIG_HELP)]
        config: PathBuf,
        /// Required probability of reaching the target by the planned day.
        #[arg(long)]
        pos: f64,
        /// `auto` uses direct search when the allocation box has at most
        /// --dim-ceiling points, else the stepwise LP (no caps) or
        /// differential evolution (caps).
        #[arg(long, value_enum, default_value = "auto")]
        method: MethodChoice,
        /// Seed for differential evolution.
        #[arg(long, default_value_t = 20_240_601)]
        seed: u64,
        /// Largest allocation box searched exhaustively.
        #[arg(long, default_value_t = DEFAULT_DIM_CEILING)]
        dim_ceiling: f64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo simulation (simulate.csv) and analytic-vs-simulation
    /// comparison with z-scores (comparison.csv, simulate.json).
    Simulate {
        #[arg(help = CONFIG_HELP)]
        config: PathBuf,
        /// Number of replications.
        #[arg(long, default_value_t = 10_000)]
        reps: u64,
        /// Random seed; results do not depend on the thread count.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Last simulated day (at least the planned day).
        #[arg(long)]
        horizon: Option<u32>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Reproduces the site-aggregation accuracy table Dif(K)
    /// (appendix.csv, appendix.json).
    AppendixCheck {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("ENROLL_OPT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().map_err(|_| {
        CliError::Config(ConfigError::new(
            "ENROLL_OPT_THREADS",
            format!("expected a non-negative integer, got {raw:?}"),
        ))
    })?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<String, CliError> {
    configure_threads()?;
    let load = |p: &PathBuf| StudyConfig::from_path(p).map_err(CliError::from);
    match cli.command {
        Command::Forecast { config, method, q, out } => commands::forecast(&load(&config)?, method.into(), q, &out),
        Command::CapImpact { config, q, out } => commands::cap_impact(&load(&config)?, q, &out),
        Command::Optimize {
            config,
            pos,
            method,
            seed,
            dim_ceiling,
            out,
        } => commands::optimize(
            &load(&config)?,
            &OptimizeArgs {
                pos,
                method,
                seed,
                dim_ceiling,
            },
            &out,
        ),
        Command::Simulate {
            config,
            reps,
            seed,
            horizon,
            out,
        } => commands::simulate_cmd(&load(&config)?, reps, seed, horizon, &out),
        Command::AppendixCheck { out } => commands::appendix_check(&out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
