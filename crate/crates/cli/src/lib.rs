//! Configuration files, single runs and experiment sweeps.

pub mod config;
pub mod sweep;

pub use config::{load_config, parse_config, serialize_config, ConfigFileError, ExperimentPlan};
pub use sweep::{plan_runs, run_sweep, simulate, write_sweep, RunSpec, SweepError};
