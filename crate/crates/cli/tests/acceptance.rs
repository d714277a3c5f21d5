//! Acceptance criteria 1-13, one PASS/FAIL line each.
//!
//! Every simulation goes through [`traced`], which steps tick by tick and
//! checks the mediator balance and the compatibility of every pair after
//! each round; criteria 3 and 4 report over all of those traces.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use taxi_dispatch::economics::PricingMode;
use taxi_dispatch::geometry::Trip;
use taxi_dispatch::metrics::{write_summary, ALL_CLASSES};
use taxi_dispatch::model::TaxiState;
use taxi_dispatch::strategies::reassign;
use taxi_dispatch::{
    aggregate, brute_force_assignment, solve_assignment, CharSet, CostMatrix, CustomerId, CustomerRequest,
    CustomerState, LedgerMode, MediatorLedger, Point, PricingScheme, RunStats, SimConfig, Simulation, StrategyKind,
    Taxi, TaxiId, Taxonomy, World,
};

const SEEDS: u64 = 10;

#[derive(Default)]
struct TraceTotals {
    gated_runs: usize,
    gated_rounds: u64,
    min_balance: f64,
    mixed_runs: usize,
    ticks_checked: u64,
    incompatible: usize,
}

static TRACES: Mutex<Option<TraceTotals>> = Mutex::new(None);

struct Traced {
    stats: RunStats,
    secs: f64,
}

fn traced(config: &SimConfig, kind: StrategyKind) -> Traced {
    let start = Instant::now();
    let mut sim = Simulation::new(config.clone(), kind).expect("valid config");
    let gated = config.ledger == LedgerMode::BudgetGated;
    let mixed = config.request_mix.iter().any(|(s, f)| !s.is_empty() && *f > 0.0);
    let (mut min_balance, mut rounds, mut ticks, mut bad) = (f64::INFINITY, 0, 0, 0);
    while !sim.is_finished() {
        sim.step();
        ticks += 1;
        bad += sim.incompatible_pairs().len();
        if gated {
            min_balance = min_balance.min(sim.ledger().balance());
            rounds += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let out = sim.finish();
    let mut guard = TRACES.lock().unwrap();
    let t = guard.get_or_insert_with(|| TraceTotals {
        min_balance: f64::INFINITY,
        ..Default::default()
    });
    if gated {
        t.gated_runs += 1;
        t.gated_rounds += rounds;
        t.min_balance = t.min_balance.min(min_balance);
    }
    if mixed {
        t.mixed_runs += 1;
    }
    t.ticks_checked += ticks;
    t.incompatible += bad;
    Traced { stats: out.stats, secs }
}

fn seeds(config: &SimConfig, kind: StrategyKind) -> Vec<Traced> {
    (0..SEEDS)
        .into_par_iter()
        .map(|seed| traced(&SimConfig { seed, ..config.clone() }, kind))
        .collect()
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn mean_wait(runs: &[Traced], class: &str) -> f64 {
    mean(runs.iter().map(|r| r.stats.classes[class].mean_wait_min.expect("served customers")))
}

fn empty_km(runs: &[Traced]) -> f64 {
    mean(runs.iter().map(|r| r.stats.empty_km_per_1000.expect("served customers")))
}

fn at(config: &SimConfig, demand: usize) -> SimConfig {
    SimConfig {
        customers_per_interval: demand,
        ..config.clone()
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn matching_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0;
    let mut instances = 0;
    for rows in 1..=5 {
        for cols in 1..=5 {
            for k in 0..200 {
                let mut m = CostMatrix::forbidden(rows, cols);
                let integral = k % 2 == 0;
                for r in 0..rows {
                    for c in 0..cols {
                        if rng.random_bool(0.25) {
                            continue;
                        }
                        let v = if integral { rng.random_range(0..4) as f64 } else { rng.random_range(0.0..10.0) };
                        m.set(r, c, v).unwrap();
                    }
                }
                let fast = solve_assignment(&m);
                let slow = brute_force_assignment(&m).unwrap();
                if fast.len() != slow.len() || fast.total != slow.total {
                    mismatches += 1;
                }
                instances += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        mismatches == 0 && secs < 5.0,
        format!("{instances} instances, {mismatches} mismatches, {secs:.2}s"),
    )
}

fn individual_rationality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    let mut checks = 0;
    for mode in [PricingMode::DriverPaysPickup, PricingMode::CustomerPaysPickup, PricingMode::FixedPrice] {
        let scheme = PricingScheme::default().with_mode(mode);
        for _ in 0..10_000 {
            let k = Trip::new(rng.random_range(0.0..12.0), rng.random_range(0.0..12.0));
            let i = Trip::new(rng.random_range(0.0..12.0), rng.random_range(0.0..12.0));
            let (pk, pi) = (Some(scheme.quote(k.ride)), Some(scheme.quote(i.ride)));
            let c = scheme.compensation(&k, &i, pk, pi).unwrap();
            let before = scheme.revenue(&k, pk).unwrap();
            let after = scheme.revenue(&i, pi).unwrap() + c;
            let whole = after >= before - 1e-9;
            let exact = i.total() > k.total() || (after - before).abs() <= 1e-9;
            if !(whole && exact) {
                violations += 1;
            }
            checks += 1;
        }
    }
    outcome(violations == 0, format!("{checks} pairs over 3 schemes, {violations} violations"))
}

/// Closure by reachability from each declared trait.
fn reachable(n: usize, edges: &[(usize, usize)], set: u64) -> u64 {
    let mut out = set;
    let mut stack: Vec<usize> = (0..n).filter(|i| set >> i & 1 == 1).collect();
    while let Some(y) = stack.pop() {
        for &(narrower, broader) in edges {
            if broader == y && out >> narrower & 1 == 0 {
                out |= 1 << narrower;
                stack.push(narrower);
            }
        }
    }
    out
}

fn closure_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    let mut sets = 0;
    for _ in 0..500 {
        let n = rng.random_range(1..=8);
        let mut t = Taxonomy::new();
        for i in 0..n {
            t.add_characteristic(&format!("c{i}"), 0.0).unwrap();
        }
        let edges: Vec<(usize, usize)> = (0..rng.random_range(0..=2 * n))
            .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
            .collect();
        for &(a, b) in &edges {
            t.add_subsumption(&format!("c{a}"), &format!("c{b}")).unwrap();
        }
        for set in 0..1u64 << n {
            if t.closure(CharSet::from_bits(set)).unwrap().bits() != reachable(n, &edges, set) {
                mismatches += 1;
            }
            sets += 1;
        }
    }
    outcome(mismatches == 0, format!("500 taxonomies, {sets} sets, {mismatches} mismatches"))
}

fn worked_swap() -> Outcome {
    let tx = Taxonomy::new();
    let request = |id, x| {
        let mut c = CustomerRequest::new(CustomerId(id), Point::new(x, 0.0), Point::new(x, 5.0), CharSet::EMPTY, 0.0);
        c.state = CustomerState::Assigned(TaxiId(id));
        c
    };
    let mut taxis = vec![
        Taxi::new(TaxiId(0), Point::new(0.0, 0.0), CharSet::EMPTY, true),
        Taxi::new(TaxiId(1), Point::new(4.0, 0.0), CharSet::EMPTY, true),
    ];
    for (i, t) in taxis.iter_mut().enumerate() {
        t.state = TaxiState::Assigned(CustomerId(i as u32));
    }
    let world = World::new(taxis, vec![request(0, 3.0), request(1, 1.0)], &tx).unwrap();
    let config = SimConfig::default();
    let mut ledger = MediatorLedger::new(LedgerMode::BudgetGated);
    let d = reassign(&world, &tx, &config.pricing, &mut ledger, config.reassign_policy(), 0);
    let swapped = d.pairs == [(TaxiId(0), CustomerId(1)), (TaxiId(1), CustomerId(0))];
    let each = d.compensations.iter().all(|c| (c.amount + 0.4).abs() <= 1e-9) && d.compensations.len() == 2;
    let balance = ledger.balance();
    outcome(
        d.adopted && swapped && each && (balance - 0.8).abs() <= 1e-9,
        format!(
            "c = {:?}, ledger {balance:.9}",
            d.compensations.iter().map(|c| c.amount).collect::<Vec<_>>()
        ),
    )
}

fn determinism() -> Outcome {
    let config = SimConfig {
        n_taxis: 300,
        customers_per_interval: 190,
        duration: 7200.0,
        seed: 11,
        ..SimConfig::default()
    };
    let summary = || {
        let stats: Vec<RunStats> = StrategyKind::ALL
            .iter()
            .map(|&k| traced(&config, k).stats)
            .collect();
        let mut buf = Vec::new();
        write_summary(&aggregate(&stats), &mut buf).unwrap();
        buf
    };
    let (a, b) = (summary(), summary());
    outcome(a == b, format!("4 strategies, {} bytes each", a.len()))
}

fn pct(new: f64, old: f64) -> f64 {
    100.0 * (1.0 - new / old)
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut results: BTreeMap<u32, Outcome> = BTreeMap::new();
    results.insert(1, matching_oracle());
    results.insert(2, individual_rationality());
    results.insert(5, closure_oracle());
    results.insert(6, worked_swap());
    results.insert(7, determinism());

    // Untyped demand at 625 per interval.
    let untyped = at(&SimConfig::untyped(), 625);
    let ntnr = seeds(&untyped, StrategyKind::Ntnr);
    let mindist = seeds(&untyped, StrategyKind::MinDistReassign);
    let (e_ntnr, e_min) = (empty_km(&ntnr), empty_km(&mindist));
    results.insert(
        8,
        outcome(
            pct(e_min, e_ntnr) >= 30.0,
            format!(
                "empty km per 1000: ntnr {e_ntnr:.1}, mindist_reassign {e_min:.1} ({:.1}% lower)",
                pct(e_min, e_ntnr)
            ),
        ),
    );
    let subsidized = seeds(
        &SimConfig {
            ledger: LedgerMode::Subsidized { initial: 100.0 },
            ..untyped.clone()
        },
        StrategyKind::MinDistReassign,
    );
    let (w_gated, w_sub) = (mean_wait(&mindist, ALL_CLASSES), mean_wait(&subsidized, ALL_CLASSES));
    let change = 100.0 * (w_sub - w_gated).abs() / w_gated;
    results.insert(
        12,
        outcome(
            change < 5.0,
            format!("mean wait gated {w_gated:.3} min, subsidized {w_sub:.3} min ({change:.2}% apart)"),
        ),
    );

    // Typed demand.
    let typed = SimConfig::default();
    let t_ntnr = seeds(&at(&typed, 500), StrategyKind::Ntnr);
    let t_min = seeds(&at(&typed, 500), StrategyKind::MinDistReassign);
    let mut worst = f64::INFINITY;
    let mut parts = Vec::new();
    for (set, _) in &typed.request_mix {
        let class = typed.taxonomy.class_name(*set);
        let (a, b) = (mean_wait(&t_ntnr, &class), mean_wait(&t_min, &class));
        worst = worst.min(pct(b, a));
        parts.push(format!("{class} {a:.2}->{b:.2} ({:.1}%)", pct(b, a)));
    }
    results.insert(9, outcome(worst >= 25.0, format!("mean wait min, ntnr->mindist_reassign: {}", parts.join(", "))));

    let mut ordered = true;
    let mut parts = Vec::new();
    let mut fcfs_ratio = 0.0;
    for demand in [625, 750, 875, 1000] {
        let c = at(&typed, demand);
        let w: Vec<f64> = [StrategyKind::MinDistReassign, StrategyKind::Ntnr, StrategyKind::Fcfs]
            .iter()
            .map(|&k| mean_wait(&seeds(&c, k), ALL_CLASSES))
            .collect();
        ordered &= w[0] <= w[1] && w[1] <= w[2];
        if demand == 750 {
            fcfs_ratio = w[2] / w[1];
        }
        parts.push(format!("{demand}: {:.2}/{:.2}/{:.2}", w[0], w[1], w[2]));
    }
    results.insert(
        10,
        outcome(
            ordered && fcfs_ratio >= 2.0,
            format!(
                "mean wait mindist/ntnr/fcfs {}; fcfs/ntnr at 750 = {fcfs_ratio:.2}",
                parts.join(", ")
            ),
        ),
    );

    let half = SimConfig {
        participation_fraction: 0.5,
        ..SimConfig::untyped()
    };
    let mut fair = true;
    let mut parts = Vec::new();
    for demand in (250..=1000).step_by(125) {
        let runs = seeds(&at(&half, demand), StrategyKind::MinDistReassign);
        let p = mean(runs.iter().map(|r| r.stats.income_participating_per_1000.unwrap()));
        let n = mean(runs.iter().map(|r| r.stats.income_non_participating_per_1000.unwrap()));
        fair &= p >= n;
        parts.push(format!("{demand}: {p:.1} vs {n:.1}"));
    }
    results.insert(11, outcome(fair, format!("income per 1000, participating vs not: {}", parts.join(", "))));

    // Small scale: a tenth of the fleet on a 0.9 x 0.9 km area.
    let small = SimConfig {
        n_taxis: 100,
        width: 0.9,
        height: 0.9,
        spatial: SimConfig::default().spatial.scaled(0.1),
        customers_per_interval: 62,
        ..SimConfig::default()
    };
    let before = TRACES.lock().unwrap().as_ref().map_or(0, |t| t.incompatible);
    let mut slowest: f64 = 0.0;
    let w: Vec<f64> = [StrategyKind::MinDistReassign, StrategyKind::Ntnr, StrategyKind::Fcfs]
        .iter()
        .map(|&k| {
            let runs = seeds(&small, k);
            slowest = runs.iter().map(|r| r.secs).fold(slowest, f64::max);
            mean_wait(&runs, ALL_CLASSES)
        })
        .collect();
    let traces = TRACES.lock().unwrap();
    let t = traces.as_ref().expect("runs were traced");
    let small_ok = slowest < 10.0 && w[0] <= w[1] && w[1] <= w[2] && t.incompatible == before && t.min_balance >= 0.0;
    results.insert(
        13,
        outcome(
            small_ok,
            format!("slowest run {slowest:.2}s, mean wait mindist/ntnr/fcfs {:.3}/{:.3}/{:.3}", w[0], w[1], w[2]),
        ),
    );

    results.insert(
        3,
        outcome(
            t.gated_runs > 0 && t.min_balance >= 0.0,
            format!(
                "{} budget-gated runs, {} rounds, lowest balance {:.6}",
                t.gated_runs, t.gated_rounds, t.min_balance
            ),
        ),
    );
    results.insert(
        4,
        outcome(
            t.mixed_runs > 0 && t.incompatible == 0,
            format!(
                "{} mixed-type runs, {} ticks checked, {} incompatible pairs",
                t.mixed_runs, t.ticks_checked, t.incompatible
            ),
        ),
    );

    let mut failed = 0;
    for (n, o) in &results {
        println!("criterion {n:>2}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "{} of {} criteria passed in {:.0}s",
        results.len() - failed,
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
