use std::collections::{BTreeMap, VecDeque};

use rand_chacha::ChaCha8Rng;

use super::config::{ConfigError, SimConfig};
use super::generate::{generate_fleet, DemandGenerator};
use super::{rng_stream, Stream};
use crate::economics::{LedgerEntry, MediatorLedger, PricingMode};
use crate::geometry::{distance, Point, Trip};
use crate::metrics::{RunMeta, RunStats, TripLog, TripRecord};
use crate::model::{CustomerId, CustomerRequest, CustomerState, TaxiId, TaxiState, World};
use crate::strategies::{AssignmentDecision, AssignmentStrategy, StrategyContext, StrategyKind};

/// Conservation totals, used to cross-check a run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Totals {
    /// Kilometres moved by all taxis, summed per movement.
    pub moved_km: f64,
    /// Everything customers paid.
    pub payments: f64,
    /// Compensations paid out by the mediator (net).
    pub compensations: f64,
}

/// Result of a finished run.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<TripRecord>,
    pub meta: RunMeta,
    pub stats: RunStats,
    pub compensations: Vec<LedgerEntry>,
    pub totals: Totals,
    pub world: World,
    pub ledger: MediatorLedger,
}

/// One simulation instance, advanced tick by tick.
pub struct Simulation {
    config: SimConfig,
    strategy: Box<dyn AssignmentStrategy + Send + Sync>,
    world: World,
    ledger: MediatorLedger,
    /// `None` when arrivals were scripted up front.
    demand: Option<DemandGenerator>,
    demand_rng: ChaCha8Rng,
    next_interval: usize,
    pending: VecDeque<CustomerRequest>,
    tick_index: u64,
    log: TripLog,
    totals: Totals,
    last_decision: AssignmentDecision,
}

impl Simulation {
    pub fn new(config: SimConfig, kind: StrategyKind) -> Result<Self, ConfigError> {
        config.validate()?;
        let fleet = generate_fleet(&config, &mut rng_stream(config.seed, Stream::Fleet));
        let world = World::new(fleet, Vec::new(), &config.taxonomy)?;
        Ok(Self {
            strategy: kind.build(),
            world,
            ledger: MediatorLedger::new(config.ledger),
            demand: Some(DemandGenerator::new(&config)),
            demand_rng: rng_stream(config.seed, Stream::Demand),
            next_interval: 0,
            pending: VecDeque::new(),
            tick_index: 0,
            log: TripLog::new(),
            totals: Totals::default(),
            last_decision: AssignmentDecision::default(),
            config,
        })
    }

    /// Starts from a prepared world instead of a generated fleet. Only the
    /// scripted `arrivals` enter later; their ids must continue those of the
    /// world and they must be sorted by arrival time.
    pub fn from_world(
        config: SimConfig,
        kind: StrategyKind,
        world: World,
        arrivals: Vec<CustomerRequest>,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        assert!(
            arrivals.windows(2).all(|w| w[0].created_at <= w[1].created_at),
            "arrivals must be sorted"
        );
        Ok(Self {
            strategy: kind.build(),
            world,
            ledger: MediatorLedger::new(config.ledger),
            demand: None,
            demand_rng: rng_stream(config.seed, Stream::Demand),
            next_interval: 0,
            pending: arrivals.into(),
            tick_index: 0,
            log: TripLog::new(),
            totals: Totals::default(),
            last_decision: AssignmentDecision::default(),
            config,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn ledger(&self) -> &MediatorLedger {
        &self.ledger
    }

    pub fn totals(&self) -> Totals {
        self.totals
    }

    pub fn records(&self) -> &[TripRecord] {
        self.log.records()
    }

    /// Decision applied in the most recent tick.
    pub fn last_decision(&self) -> &AssignmentDecision {
        &self.last_decision
    }

    /// Start time of the next tick.
    pub fn clock(&self) -> f64 {
        self.tick_index as f64 * self.config.tick
    }

    /// Demand has ended and every dispatched taxi has finished its job.
    pub fn is_finished(&self) -> bool {
        self.clock() >= self.config.duration && self.world.taxis.iter().all(|t| t.is_available())
    }

    /// Pairs in the current assignment or on board that break a requirement.
    pub fn incompatible_pairs(&self) -> Vec<(TaxiId, CustomerId)> {
        self.world
            .taxis
            .iter()
            .filter_map(|t| match t.state {
                TaxiState::Assigned(c) | TaxiState::Busy(c) => Some((t.id, c)),
                TaxiState::Available => None,
            })
            .filter(|&(t, c)| !self.world.compatible(t, c))
            .collect()
    }

    /// Runs one tick: arrivals, one strategy round (while demand lasts),
    /// then movement.
    pub fn step(&mut self) {
        let now = self.clock();
        if now < self.config.duration {
            self.inject(now);
            let mut ctx = StrategyContext {
                taxonomy: &self.config.taxonomy,
                scheme: &self.config.pricing,
                ledger: &mut self.ledger,
                policy: self.config.reassign_policy(),
                round: self.tick_index,
            };
            let decision = self.strategy.assign(&self.world, &mut ctx);
            self.apply(&decision, now);
            self.last_decision = decision;
        } else {
            self.last_decision = AssignmentDecision::default();
        }
        for i in 0..self.world.taxis.len() {
            self.advance(i, now);
        }
        self.tick_index += 1;
        self.world.clock = self.clock();
    }

    fn inject(&mut self, now: f64) {
        if let Some(demand) = &mut self.demand {
            while self.next_interval < self.config.intervals()
                && self.next_interval as f64 * self.config.interval <= now
            {
                let batch = demand.interval(&self.config, &mut self.demand_rng, self.next_interval);
                self.pending.extend(batch);
                self.next_interval += 1;
            }
        }
        while self.pending.front().is_some_and(|c| c.created_at <= now) {
            let mut c = self.pending.pop_front().expect("checked");
            if c.created_at >= self.config.duration {
                continue;
            }
            if self.config.pricing.mode == PricingMode::FixedPrice {
                c.contracted_price = Some(self.config.pricing.quote(c.ride_km()));
            }
            assert_eq!(c.id.index(), self.world.customers.len(), "customer ids must be dense");
            self.world.open.push(c.id);
            self.world.customers.push(c);
        }
    }

    fn apply(&mut self, decision: &AssignmentDecision, now: f64) {
        let w = &mut self.world;
        for &(t, c) in &decision.pairs {
            debug_assert!(w.compatible(t, c), "strategy proposed an incompatible pair");
            let taxi = &mut w.taxis[t.index()];
            if taxi.state == TaxiState::Assigned(c) {
                continue;
            }
            match taxi.state {
                TaxiState::Assigned(k) => {
                    let old = &mut w.customers[k.index()];
                    if old.state == CustomerState::Assigned(t) {
                        old.state = CustomerState::Unassigned;
                        old.reassignments += 1;
                    }
                }
                TaxiState::Available => {
                    taxi.job_empty_km = 0.0;
                    taxi.job_occupied_km = 0.0;
                    taxi.job_compensation = 0.0;
                }
                TaxiState::Busy(_) => unreachable!("busy taxis are never dispatched"),
            }
            taxi.state = TaxiState::Assigned(c);
            let cust = &mut w.customers[c.index()];
            debug_assert!(cust.picked_up_at.is_none());
            if let CustomerState::Assigned(prev) = cust.state {
                if prev != t {
                    cust.reassignments += 1;
                }
            }
            cust.state = CustomerState::Assigned(t);
            cust.assigned_at = Some(now);
        }
        for comp in &decision.compensations {
            let taxi = &mut w.taxis[comp.taxi.index()];
            taxi.income += comp.amount;
            taxi.job_compensation += comp.amount;
            self.totals.compensations += comp.amount;
        }
        #[cfg(debug_assertions)]
        for taxi in &w.taxis {
            if let TaxiState::Assigned(c) = taxi.state {
                assert_eq!(w.customers[c.index()].state, CustomerState::Assigned(taxi.id));
            }
        }
    }

    /// Moves taxi `i` through one tick starting at `now`, passing through
    /// as many lifecycle stages as the time allows.
    fn advance(&mut self, i: usize, now: f64) {
        let tick = self.config.tick;
        let mut budget = tick;
        loop {
            let (state, dwell) = (self.world.taxis[i].state, self.world.taxis[i].dwell);
            match (state, dwell) {
                (TaxiState::Available, _) => return,
                (_, Some(left)) => {
                    if left > budget {
                        self.world.taxis[i].dwell = Some(left - budget);
                        return;
                    }
                    budget -= left;
                    self.world.taxis[i].dwell = None;
                    match state {
                        TaxiState::Assigned(c) => self.board(i, c),
                        TaxiState::Busy(c) => self.complete(i, c, now + tick - budget),
                        TaxiState::Available => unreachable!(),
                    }
                }
                (TaxiState::Assigned(c), None) => {
                    let target = self.world.customers[c.index()].origin;
                    match self.drive(i, target, &mut budget, false) {
                        Some(()) => {
                            let arrived = now + tick - budget;
                            self.world.customers[c.index()].picked_up_at = Some(arrived);
                            if let Ok(pos) = self.world.open.binary_search(&c) {
                                self.world.open.remove(pos);
                            }
                            self.world.taxis[i].dwell = Some(self.config.pickup_time);
                        }
                        None => return,
                    }
                }
                (TaxiState::Busy(c), None) => {
                    let target = self.world.customers[c.index()].destination;
                    match self.drive(i, target, &mut budget, true) {
                        Some(()) => self.world.taxis[i].dwell = Some(self.config.dropoff_time),
                        None => return,
                    }
                }
            }
        }
    }

    /// Drives toward `target` for at most `budget` seconds. Returns
    /// `Some(())` on arrival, with the unused time left in `budget`.
    fn drive(&mut self, i: usize, target: Point, budget: &mut f64, occupied: bool) -> Option<()> {
        let speed = self.config.speed;
        let taxi = &mut self.world.taxis[i];
        let remaining = distance(taxi.position, target);
        let reach = crate::geometry::reach(speed, *budget);
        let (moved, arrived) = if reach >= remaining {
            *budget = (*budget - remaining * 3600.0 / speed).max(0.0);
            taxi.position = target;
            (remaining, true)
        } else {
            taxi.position = crate::geometry::advance(taxi.position, target, speed, *budget);
            *budget = 0.0;
            (reach, false)
        };
        if occupied {
            taxi.odometer_occupied += moved;
            taxi.job_occupied_km += moved;
        } else {
            taxi.odometer_empty += moved;
            taxi.job_empty_km += moved;
        }
        self.totals.moved_km += moved;
        arrived.then_some(())
    }

    fn board(&mut self, i: usize, c: CustomerId) {
        let taxi = &mut self.world.taxis[i];
        taxi.state = TaxiState::Busy(c);
        self.world.customers[c.index()].state = CustomerState::Served(taxi.id);
    }

    fn complete(&mut self, i: usize, c: CustomerId, at: f64) {
        let scheme = &self.config.pricing;
        let taxi = &mut self.world.taxis[i];
        let cust = &mut self.world.customers[c.index()];
        let trip = Trip::new(taxi.job_empty_km, taxi.job_occupied_km);
        let revenue = scheme
            .revenue(&trip, cust.contracted_price)
            .expect("fixed-price customers carry a contracted price");
        let payment = scheme
            .payment(&trip, cust.contracted_price)
            .expect("fixed-price customers carry a contracted price");
        taxi.income += revenue;
        taxi.state = TaxiState::Available;
        cust.state = CustomerState::Completed;
        cust.dropped_off_at = Some(at);
        self.totals.payments += payment;
        let record = TripRecord {
            customer: c,
            taxi: taxi.id,
            class: self.config.taxonomy.class_name(cust.requirements),
            wait_s: cust.picked_up_at.expect("boarded customers were reached") - cust.created_at,
            empty_km: taxi.job_empty_km,
            occupied_km: taxi.job_occupied_km,
            fare_paid: payment,
            taxi_income: revenue + taxi.job_compensation,
            taxi_participates: taxi.participates,
            reassignments: cust.reassignments,
        };
        self.log.record(record).expect("each customer completes once");
    }

    /// Steps until the run is over.
    pub fn run_to_end(&mut self) {
        while !self.is_finished() {
            self.step();
        }
    }

    /// Consumes a finished simulation.
    pub fn finish(mut self) -> RunOutput {
        self.run_to_end();
        let kind = self.strategy.kind();
        let mut unserved: BTreeMap<String, usize> = self
            .config
            .request_mix
            .iter()
            .map(|(set, _)| (self.config.taxonomy.class_name(*set), 0))
            .collect();
        for c in &self.world.customers {
            if c.is_waiting() {
                *unserved.entry(self.config.taxonomy.class_name(c.requirements)).or_default() += 1;
            }
        }
        let participating = self.world.taxis.iter().filter(|t| t.participates).count();
        let meta = RunMeta {
            strategy: kind.as_str().to_string(),
            demand_per_hour: self.config.demand_per_hour(),
            seed: self.config.seed,
            taxis_participating: participating,
            taxis_non_participating: self.world.taxis.len() - participating,
            mediator_balance: self.ledger.balance(),
            unserved,
        };
        let records = self.log.into_records();
        RunOutput {
            stats: RunStats::from_records(&records, meta.clone()),
            records,
            meta,
            compensations: self.ledger.history().to_vec(),
            totals: self.totals,
            world: self.world,
            ledger: self.ledger,
        }
    }
}

/// Simulates one configuration with one strategy to completion.
pub fn run(config: &SimConfig, kind: StrategyKind) -> Result<RunOutput, ConfigError> {
    Ok(Simulation::new(config.clone(), kind)?.finish())
}
