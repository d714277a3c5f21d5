use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use taxi_dispatch::metrics::{records_file_name, write_compensations, write_records, write_summary, MetricsError};
use taxi_dispatch::sim::ConfigError;
use taxi_dispatch::{aggregate, run, ReportRow, RunOutput, RunStats, SimConfig, StrategyKind};
use thiserror::Error;

use crate::config::ExperimentPlan;

pub const SUMMARY_FILE: &str = "summary.csv";
pub const COMPENSATIONS_FILE: &str = "compensations.csv";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("{strategy} at demand {demand}, seed {seed}: {source}")]
    Run {
        strategy: StrategyKind,
        demand: usize,
        seed: u64,
        #[source]
        source: ConfigError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("thread pool: {0}")]
    Pool(String),
}

/// One cell of a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunSpec {
    pub strategy: StrategyKind,
    pub demand: usize,
    pub seed: u64,
}

impl RunSpec {
    pub fn config(&self, base: &SimConfig) -> SimConfig {
        SimConfig {
            customers_per_interval: self.demand,
            seed: self.seed,
            ..base.clone()
        }
    }
}

/// Strategies x demands x repetitions, in that nesting order. Repetition
/// `k` uses seed `base seed + k`.
pub fn plan_runs(plan: &ExperimentPlan) -> Vec<RunSpec> {
    let mut specs = Vec::with_capacity(plan.strategies.len() * plan.demands.len() * plan.repetitions);
    for &strategy in &plan.strategies {
        for &demand in &plan.demands {
            for k in 0..plan.repetitions as u64 {
                specs.push(RunSpec {
                    strategy,
                    demand,
                    seed: plan.base.seed.wrapping_add(k),
                });
            }
        }
    }
    specs
}

fn execute(plan: &ExperimentPlan) -> Result<Vec<RunStats>, SweepError> {
    plan_runs(plan)
        .par_iter()
        .map(|spec| {
            run(&spec.config(&plan.base), spec.strategy)
                .map(|out| out.stats)
                .map_err(|source| SweepError::Run {
                    strategy: spec.strategy,
                    demand: spec.demand,
                    seed: spec.seed,
                    source,
                })
        })
        .collect()
}

/// Runs every cell of the plan and averages over repetitions. `jobs`
/// bounds the worker threads; results do not depend on it.
pub fn run_sweep(plan: &ExperimentPlan, jobs: Option<usize>) -> Result<Vec<ReportRow>, SweepError> {
    let stats = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| SweepError::Pool(e.to_string()))?
            .install(|| execute(plan))?,
        None => execute(plan)?,
    };
    Ok(aggregate(&stats))
}

fn create(path: &Path) -> Result<BufWriter<File>, SweepError> {
    File::create(path).map(BufWriter::new).map_err(|source| SweepError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), SweepError> {
    fs::create_dir_all(dir).map_err(|source| SweepError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Runs the sweep and writes `summary.csv` into `dir`.
pub fn write_sweep(plan: &ExperimentPlan, dir: &Path, jobs: Option<usize>) -> Result<Vec<ReportRow>, SweepError> {
    let rows = run_sweep(plan, jobs)?;
    ensure_dir(dir)?;
    write_summary(&rows, create(&dir.join(SUMMARY_FILE))?)?;
    Ok(rows)
}

/// One run. With `out`, writes its summary, its trip records and the
/// settled compensations there.
pub fn simulate(config: &SimConfig, strategy: StrategyKind, out: Option<&Path>) -> Result<RunOutput, SweepError> {
    let output = run(config, strategy).map_err(|source| SweepError::Run {
        strategy,
        demand: config.customers_per_interval,
        seed: config.seed,
        source,
    })?;
    if let Some(dir) = out {
        ensure_dir(dir)?;
        write_summary(&aggregate(std::slice::from_ref(&output.stats)), create(&dir.join(SUMMARY_FILE))?)?;
        let name = records_file_name(strategy.as_str(), config.demand_per_hour(), config.seed);
        write_records(&output.records, create(&dir.join(name))?)?;
        write_compensations(&output.compensations, create(&dir.join(COMPENSATIONS_FILE))?)?;
    }
    Ok(output)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_order_and_seeds() {
        let mut plan = ExperimentPlan::default();
        plan.base.seed = 40;
        plan.repetitions = 2;
        plan.demands = vec![10, 20];
        plan.strategies = vec![StrategyKind::Ntnr, StrategyKind::Fcfs];
        let specs = plan_runs(&plan);
        assert_eq!(specs.len(), 8);
        assert_eq!(specs[0], RunSpec { strategy: StrategyKind::Ntnr, demand: 10, seed: 40 });
        assert_eq!(specs[1].seed, 41);
        assert_eq!(specs[2].demand, 20);
        assert_eq!(specs[4].strategy, StrategyKind::Fcfs);
        assert_eq!(specs[4].config(&plan.base).customers_per_interval, 10);
    }

    #[test]
    fn full_grid_has_twenty_one_cells() {
        let plan = ExperimentPlan::default();
        let specs = plan_runs(&plan);
        assert_eq!(specs.len(), 7 * 3 * 10);
        let seeds: Vec<u64> = specs[..10].iter().map(|s| s.seed).collect();
        assert_eq!(seeds, (0..10).collect::<Vec<_>>());
    }
}
