//! Discrete-time simulation of a taxi fleet under one assignment strategy.

mod config;
mod engine;
mod generate;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{ConfigError, Mix, SimConfig, SpatialConfig};
pub use engine::{run, RunOutput, Simulation, Totals};
pub use generate::{generate_demand, generate_fleet, mix_counts, DemandGenerator};

/// Independent random streams of one seed. Fleet and demand draw from
/// separate streams so every strategy sees the same world for a seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Fleet = 0,
    Demand = 1,
}

pub fn rng_stream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
