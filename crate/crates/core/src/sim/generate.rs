//! Random fleet and demand.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use super::config::{Mix, SimConfig};
use crate::geometry::{distance, Point};
use crate::model::{CustomerId, CustomerRequest, Taxi, TaxiId};
use crate::taxonomy::CharSet;

const MAX_OUTSKIRTS_DRAWS: usize = 100;

/// Splits `n` into integer counts proportional to the mix fractions,
/// handing the remainder to the largest fractional parts (earlier entries
/// first on ties).
pub fn mix_counts(mix: &Mix, n: usize) -> Vec<usize> {
    let total: f64 = mix.iter().map(|(_, f)| f).sum();
    if mix.is_empty() || total <= 0.0 {
        return vec![0; mix.len()];
    }
    let exact: Vec<f64> = mix.iter().map(|(_, f)| f / total * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..mix.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Taxis at uniform positions. Characteristic profiles follow the fleet
/// mix exactly (up to rounding) in shuffled order; the first taxis by id
/// participate in reassignment.
pub fn generate_fleet(config: &SimConfig, rng: &mut ChaCha8Rng) -> Vec<Taxi> {
    let n = config.n_taxis;
    let mut profiles: Vec<CharSet> = Vec::with_capacity(n);
    for ((set, _), count) in config.fleet_mix.iter().zip(mix_counts(&config.fleet_mix, n)) {
        profiles.extend(std::iter::repeat_n(*set, count));
    }
    profiles.shuffle(rng);
    let participating = config.participating_taxis();
    profiles
        .into_iter()
        .enumerate()
        .map(|(i, profile)| {
            let position = Point::new(
                rng.random_range(0.0..=config.width),
                rng.random_range(0.0..=config.height),
            );
            Taxi::new(TaxiId(i as u32), position, profile, i < participating)
        })
        .collect()
}

/// Stateful demand generator; each call produces one interval.
pub struct DemandGenerator {
    classes: WeightedIndex<f64>,
    sets: Vec<CharSet>,
    center: Normal<f64>,
    outskirts: Normal<f64>,
    next_id: u32,
}

impl DemandGenerator {
    pub fn new(config: &SimConfig) -> Self {
        let s = &config.spatial;
        Self {
            classes: WeightedIndex::new(config.request_mix.iter().map(|(_, f)| *f))
                .expect("request mix validated"),
            sets: config.request_mix.iter().map(|(s, _)| *s).collect(),
            center: Normal::new(0.0, s.sigma_center).expect("sigma validated"),
            outskirts: Normal::new(0.0, s.sigma_outskirts).expect("sigma validated"),
            next_id: 0,
        }
    }

    fn central_point(&self, config: &SimConfig, rng: &mut ChaCha8Rng) -> Point {
        let c = config.spatial.center;
        Point::new(c.x + self.center.sample(rng), c.y + self.center.sample(rng)).clamp_to(config.width, config.height)
    }

    fn outskirts_point(&self, config: &SimConfig, rng: &mut ChaCha8Rng) -> Point {
        let c = config.spatial.center;
        let mut p = c;
        for _ in 0..MAX_OUTSKIRTS_DRAWS {
            p = Point::new(c.x + self.outskirts.sample(rng), c.y + self.outskirts.sample(rng));
            if distance(p, c) >= config.spatial.central_radius {
                break;
            }
        }
        p.clamp_to(config.width, config.height)
    }

    /// The requests of interval `index`, sorted by arrival time and numbered
    /// consecutively after all earlier intervals.
    pub fn interval(&mut self, config: &SimConfig, rng: &mut ChaCha8Rng, index: usize) -> Vec<CustomerRequest> {
        let start = index as f64 * config.interval;
        let mut drafts: Vec<(f64, Point, Point, CharSet)> = (0..config.customers_per_interval)
            .map(|_| {
                let at = start + rng.random::<f64>() * config.interval;
                let inbound = rng.random_bool(0.5);
                let centre = self.central_point(config, rng);
                let outer = self.outskirts_point(config, rng);
                let (origin, destination) = if inbound { (outer, centre) } else { (centre, outer) };
                let class = self.sets[self.classes.sample(rng)];
                (at, origin, destination, class)
            })
            .collect();
        drafts.sort_by(|a, b| a.0.total_cmp(&b.0));
        drafts
            .into_iter()
            .map(|(at, origin, destination, class)| {
                let id = CustomerId(self.next_id);
                self.next_id += 1;
                CustomerRequest::new(id, origin, destination, class, at)
            })
            .collect()
    }
}

/// One interval of demand from a fresh generator. Ids start at zero.
pub fn generate_demand(config: &SimConfig, rng: &mut ChaCha8Rng, interval_index: usize) -> Vec<CustomerRequest> {
    DemandGenerator::new(config).interval(config, rng, interval_index)
}
