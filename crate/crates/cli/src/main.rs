use std::error::Error;
use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dispatch_sim::{load_config, simulate, write_sweep, ExperimentPlan};
use taxi_dispatch::metrics::write_summary;
use taxi_dispatch::{aggregate, StrategyKind};

#[derive(Parser)]
#[command(name = "dispatch-sim", version, about = "Taxi dispatch simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation and print its summary.
    Simulate {
        /// Configuration file; defaults apply without one.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        strategy: Option<StrategyKind>,
        /// Customers per demand interval.
        #[arg(long)]
        demand: Option<usize>,
        #[arg(long, env = "DISPATCH_SIM_SEED")]
        seed: Option<u64>,
        /// Directory for the summary, trip records and compensations.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured grid and write summary.csv.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory; overrides the configured one.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Base seed; repetitions use consecutive seeds from here.
        #[arg(long, env = "DISPATCH_SIM_SEED")]
        seed: Option<u64>,
        /// Worker threads (all cores by default).
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn plan_from(config: Option<PathBuf>) -> Result<ExperimentPlan, Box<dyn Error>> {
    Ok(match config {
        Some(path) => load_config(&path)?,
        None => ExperimentPlan::default(),
    })
}

fn execute(cli: Cli) -> Result<(), Box<dyn Error>> {
    match cli.command {
        Command::Simulate {
            config,
            strategy,
            demand,
            seed,
            out,
        } => {
            let plan = plan_from(config)?;
            let mut base = plan.base;
            if let Some(d) = demand {
                base.customers_per_interval = d;
            }
            if let Some(s) = seed {
                base.seed = s;
            }
            let output = simulate(&base, strategy.unwrap_or(plan.strategy), out.as_deref())?;
            write_summary(&aggregate(&[output.stats]), io::stdout().lock())?;
        }
        Command::Sweep { config, out, seed, jobs } => {
            let mut plan = plan_from(config)?;
            if let Some(s) = seed {
                plan.base.seed = s;
            }
            let dir = out.unwrap_or_else(|| plan.output_dir.clone());
            let rows = write_sweep(&plan, &dir, jobs)?;
            eprintln!("{} rows written to {}", rows.len(), dir.join("summary.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = e.source();
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
