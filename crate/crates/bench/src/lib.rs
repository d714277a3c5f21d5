//! Seeded inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taxi_dispatch::{
    CharSet, CostMatrix, CustomerId, CustomerRequest, CustomerState, Point, SimConfig, Taxi, TaxiId, TaxiState,
    Taxonomy, World,
};

/// A `rows x cols` matrix of distances in a 9 km square with about a
/// fifth of the cells forbidden.
pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> CostMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = CostMatrix::forbidden(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            if rng.random_bool(0.8) {
                m.set(r, c, rng.random_range(0.0..12.7)).unwrap();
            }
        }
    }
    m
}

/// `n` participating taxis, each already heading for its own customer, at
/// uniform positions in the 9 km square.
pub fn assigned_world(n: usize, seed: u64) -> (World, Taxonomy) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tx = Taxonomy::new();
    let mut point = || Point::new(rng.random_range(0.0..9.0), rng.random_range(0.0..9.0));
    let mut taxis = Vec::with_capacity(n);
    let mut customers = Vec::with_capacity(n);
    for i in 0..n {
        let mut t = Taxi::new(TaxiId(i as u32), point(), CharSet::EMPTY, true);
        t.state = TaxiState::Assigned(CustomerId(i as u32));
        taxis.push(t);
        let mut c = CustomerRequest::new(CustomerId(i as u32), point(), point(), CharSet::EMPTY, 0.0);
        c.state = CustomerState::Assigned(TaxiId(i as u32));
        customers.push(c);
    }
    (World::new(taxis, customers, &tx).unwrap(), tx)
}

/// The default typed setup shrunk to `taxis` cabs on a proportionally
/// smaller square with the same load per cab.
pub fn small_config(taxis: usize, duration: f64) -> SimConfig {
    let base = SimConfig::default();
    let share = taxis as f64 / base.n_taxis as f64;
    let side = share.sqrt();
    SimConfig {
        n_taxis: taxis,
        width: base.width * side,
        height: base.height * side,
        spatial: base.spatial.scaled(side),
        customers_per_interval: (base.customers_per_interval as f64 * share).round() as usize,
        duration,
        ..base
    }
}
