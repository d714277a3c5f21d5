use thiserror::Error;

use crate::economics::{EconomicsError, LedgerMode, PricingScheme};
use crate::geometry::Point;
use crate::strategies::{ReassignPolicy, Settlement};
use crate::taxonomy::{CharSet, Taxonomy, TaxonomyError};

/// Demand geometry: trips run between a dense centre and the outskirts.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialConfig {
    pub center: Point,
    pub sigma_center: f64,
    pub sigma_outskirts: f64,
    /// Outskirts samples closer than this to the centre are redrawn.
    pub central_radius: f64,
}

impl SpatialConfig {
    /// Centre of a `width x height` area with the default spreads.
    pub fn for_area(width: f64, height: f64) -> Self {
        Self {
            center: Point::new(width / 2.0, height / 2.0),
            sigma_center: 1.0,
            sigma_outskirts: 5.0,
            central_radius: 2.0,
        }
    }

    /// Every length multiplied by `factor`, centre included.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            center: Point::new(self.center.x * factor, self.center.y * factor),
            sigma_center: self.sigma_center * factor,
            sigma_outskirts: self.sigma_outskirts * factor,
            central_radius: self.central_radius * factor,
        }
    }
}

/// A categorical distribution over characteristic sets.
pub type Mix = Vec<(CharSet, f64)>;

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub width: f64,
    pub height: f64,
    pub n_taxis: usize,
    /// Seconds of demand; trips in flight at the end still complete.
    pub duration: f64,
    pub tick: f64,
    /// km/h.
    pub speed: f64,
    pub customers_per_interval: usize,
    pub interval: f64,
    pub pickup_time: f64,
    pub dropoff_time: f64,
    /// Declared characteristics of the fleet.
    pub fleet_mix: Mix,
    /// Requirements of the requests.
    pub request_mix: Mix,
    pub spatial: SpatialConfig,
    pub pricing: PricingScheme,
    pub ledger: LedgerMode,
    pub settlement: Settlement,
    /// Km per euro of compensation in the reassignment cost; `None` uses
    /// the running cost rate.
    pub revenue_weight: Option<f64>,
    pub participation_fraction: f64,
    pub seed: u64,
    pub taxonomy: Taxonomy,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{field} must be {expected}, got {value}")]
    OutOfRange {
        field: &'static str,
        expected: &'static str,
        value: f64,
    },
    #[error("tick {tick} does not divide interval {interval}")]
    TickInterval { tick: f64, interval: f64 },
    #[error("{0} fractions sum to {1}, expected 1")]
    MixSum(&'static str, f64),
    #[error("{0} has a negative fraction")]
    MixNegative(&'static str),
    #[error("{0} lists the same set twice")]
    MixDuplicate(&'static str),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Pricing(#[from] EconomicsError),
}

const MIX_TOLERANCE: f64 = 1e-6;

impl Default for SimConfig {
    fn default() -> Self {
        let taxonomy = Taxonomy::experiment_default();
        let ff = taxonomy.set_of(&["female-friendly"]).expect("default taxonomy");
        let euro = taxonomy.set_of(&["Eurotaxi"]).expect("default taxonomy");
        let both = ff.union(euro);
        let mix = vec![(CharSet::EMPTY, 0.65), (ff, 0.20), (euro, 0.10), (both, 0.05)];
        Self {
            width: 9.0,
            height: 9.0,
            n_taxis: 1000,
            duration: 5.0 * 3600.0,
            tick: 5.0,
            speed: 17.0,
            customers_per_interval: 625,
            interval: 900.0,
            pickup_time: 30.0,
            dropoff_time: 90.0,
            fleet_mix: mix.clone(),
            request_mix: mix,
            spatial: SpatialConfig::for_area(9.0, 9.0),
            pricing: PricingScheme::default(),
            ledger: LedgerMode::BudgetGated,
            settlement: Settlement::default(),
            revenue_weight: None,
            participation_fraction: 1.0,
            seed: 0,
            taxonomy,
        }
    }
}

fn check(field: &'static str, expected: &'static str, value: f64, ok: bool) -> Result<(), ConfigError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::OutOfRange { field, expected, value })
    }
}

fn check_mix(name: &'static str, mix: &Mix, taxonomy: &Taxonomy) -> Result<(), ConfigError> {
    let mut sum = 0.0;
    for (i, (set, f)) in mix.iter().enumerate() {
        if f.is_nan() || *f < 0.0 {
            return Err(ConfigError::MixNegative(name));
        }
        if mix[..i].iter().any(|(s, _)| s == set) {
            return Err(ConfigError::MixDuplicate(name));
        }
        taxonomy.closure(*set)?;
        sum += f;
    }
    if (sum - 1.0).abs() > MIX_TOLERANCE {
        return Err(ConfigError::MixSum(name, sum));
    }
    Ok(())
}

impl SimConfig {
    /// The default setup with the untyped request mix: every request asks
    /// for any taxi.
    pub fn untyped() -> Self {
        Self {
            request_mix: vec![(CharSet::EMPTY, 1.0)],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check("width", "> 0", self.width, self.width > 0.0)?;
        check("height", "> 0", self.height, self.height > 0.0)?;
        check("duration", ">= 0", self.duration, self.duration >= 0.0)?;
        check("tick", "> 0", self.tick, self.tick > 0.0)?;
        check("speed", "> 0", self.speed, self.speed > 0.0)?;
        check("interval", "> 0", self.interval, self.interval > 0.0)?;
        check("pickup_time", ">= 0", self.pickup_time, self.pickup_time >= 0.0)?;
        check("dropoff_time", ">= 0", self.dropoff_time, self.dropoff_time >= 0.0)?;
        let p = self.participation_fraction;
        check("participation_fraction", "in [0, 1]", p, (0.0..=1.0).contains(&p))?;
        let ratio = self.interval / self.tick;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(ConfigError::TickInterval {
                tick: self.tick,
                interval: self.interval,
            });
        }
        let s = &self.spatial;
        check("center.x", "finite", s.center.x, true)?;
        check("center.y", "finite", s.center.y, true)?;
        check("sigma_center", "> 0", s.sigma_center, s.sigma_center > 0.0)?;
        check("sigma_outskirts", "> 0", s.sigma_outskirts, s.sigma_outskirts > 0.0)?;
        check("central_radius", ">= 0", s.central_radius, s.central_radius >= 0.0)?;
        if let Some(w) = self.revenue_weight {
            check("revenue_weight", ">= 0", w, w >= 0.0)?;
        }
        let initial = self.ledger.initial_balance();
        check("ledger initial balance", ">= 0", initial, initial >= 0.0)?;
        self.pricing.validate()?;
        self.taxonomy.validate()?;
        check_mix("fleet_mix", &self.fleet_mix, &self.taxonomy)?;
        check_mix("request_mix", &self.request_mix, &self.taxonomy)?;
        Ok(())
    }

    /// Number of demand intervals that start before the end of the run.
    pub fn intervals(&self) -> usize {
        if self.duration <= 0.0 {
            0
        } else {
            (self.duration / self.interval).ceil() as usize
        }
    }

    /// Demand level in customers per hour.
    pub fn demand_per_hour(&self) -> f64 {
        self.customers_per_interval as f64 * 3600.0 / self.interval
    }

    pub fn reassign_policy(&self) -> ReassignPolicy {
        let mut policy = ReassignPolicy::for_scheme(&self.pricing);
        policy.settlement = self.settlement;
        if let Some(w) = self.revenue_weight {
            policy.revenue_weight = w;
        }
        policy
    }

    /// Number of taxis taking part in reassignment.
    pub fn participating_taxis(&self) -> usize {
        ((self.participation_fraction * self.n_taxis as f64).round() as usize).min(self.n_taxis)
    }
}
