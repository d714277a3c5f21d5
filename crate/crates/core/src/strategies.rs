//! Assignment strategies: FCFS, NTNR, type-aware NTNR and the
//! compensation-based reassignment mediator.
//!
//! Every strategy maps a [`World`] snapshot to an [`AssignmentDecision`];
//! the engine applies it. Distance ties always go to the lowest id.

use std::fmt;
use std::str::FromStr;

use crate::economics::{Compensation, MediatorLedger, PricingScheme};
use crate::geometry::Trip;
use crate::matching::{solve_assignment, CostMatrix};
use crate::model::{trip_of, CustomerId, CustomerRequest, TaxiId, World};
use crate::taxonomy::{CharSet, Taxonomy};

/// Pairs to put in place this round.
///
/// Every listed taxi ends up assigned to the listed customer; any customer
/// that loses its taxi and is not listed goes back to the queue.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AssignmentDecision {
    /// Sorted by taxi id.
    pub pairs: Vec<(TaxiId, CustomerId)>,
    /// Transfers actually settled this round.
    pub compensations: Vec<Compensation>,
    pub adopted: bool,
}

impl AssignmentDecision {
    fn baseline(mut pairs: Vec<(TaxiId, CustomerId)>) -> Self {
        pairs.sort_unstable();
        Self {
            pairs,
            compensations: Vec::new(),
            adopted: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StrategyKind {
    Fcfs,
    Ntnr,
    TypedNtnr,
    MinDistReassign,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Fcfs,
        StrategyKind::Ntnr,
        StrategyKind::TypedNtnr,
        StrategyKind::MinDistReassign,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::Fcfs => "fcfs",
            StrategyKind::Ntnr => "ntnr",
            StrategyKind::TypedNtnr => "typed_ntnr",
            StrategyKind::MinDistReassign => "mindist_reassign",
        }
    }

    pub fn build(self) -> Box<dyn AssignmentStrategy + Send + Sync> {
        match self {
            StrategyKind::Fcfs => Box::new(Fcfs),
            StrategyKind::Ntnr => Box::new(Ntnr),
            StrategyKind::TypedNtnr => Box::new(TypedNtnr),
            StrategyKind::MinDistReassign => Box::new(MinDistReassign),
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown strategy `{0}` (expected fcfs, ntnr, typed_ntnr or mindist_reassign)")]
pub struct UnknownStrategy(pub String);

impl FromStr for StrategyKind {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownStrategy(s.to_string()))
    }
}

/// What a strategy may use besides the world itself.
pub struct StrategyContext<'a> {
    pub taxonomy: &'a Taxonomy,
    pub scheme: &'a PricingScheme,
    pub ledger: &'a mut MediatorLedger,
    pub policy: ReassignPolicy,
    pub round: u64,
}

/// Knobs of the reassignment mediator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReassignPolicy {
    pub settlement: Settlement,
    /// Kilometres of pickup distance one euro of compensation is worth in
    /// the matching cost. Zero matches on distance alone.
    pub revenue_weight: f64,
}

impl ReassignPolicy {
    /// Gates whole rounds and prices compensations at the running cost, so
    /// a euro paid out weighs as much as the kilometres it would buy.
    pub fn for_scheme(scheme: &PricingScheme) -> Self {
        Self {
            settlement: Settlement::Round,
            revenue_weight: if scheme.cost > 0.0 { 1.0 / scheme.cost } else { 0.0 },
        }
    }
}

/// How the mediator gates a round of reassignments.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Settlement {
    /// All changes of the round stand or fall together.
    #[default]
    Round,
    /// Each independent exchange is gated on its own, cheapest first.
    Exchange,
}

impl Settlement {
    pub fn as_str(self) -> &'static str {
        match self {
            Settlement::Round => "round",
            Settlement::Exchange => "exchange",
        }
    }
}

impl fmt::Display for Settlement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Settlement {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "round" => Ok(Settlement::Round),
            "exchange" => Ok(Settlement::Exchange),
            other => Err(format!("unknown settlement `{other}` (expected round or exchange)")),
        }
    }
}

pub trait AssignmentStrategy {
    fn kind(&self) -> StrategyKind;
    fn assign(&self, world: &World, ctx: &mut StrategyContext<'_>) -> AssignmentDecision;
}

pub struct Fcfs;
pub struct Ntnr;
pub struct TypedNtnr;
pub struct MinDistReassign;

impl AssignmentStrategy for Fcfs {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Fcfs
    }

    fn assign(&self, world: &World, _: &mut StrategyContext<'_>) -> AssignmentDecision {
        fcfs(world)
    }
}

impl AssignmentStrategy for Ntnr {
    fn kind(&self) -> StrategyKind {
        StrategyKind::Ntnr
    }

    fn assign(&self, world: &World, _: &mut StrategyContext<'_>) -> AssignmentDecision {
        ntnr(world)
    }
}

impl AssignmentStrategy for TypedNtnr {
    fn kind(&self) -> StrategyKind {
        StrategyKind::TypedNtnr
    }

    fn assign(&self, world: &World, ctx: &mut StrategyContext<'_>) -> AssignmentDecision {
        typed_initial_assign(world, ctx.taxonomy)
    }
}

impl AssignmentStrategy for MinDistReassign {
    fn kind(&self) -> StrategyKind {
        StrategyKind::MinDistReassign
    }

    fn assign(&self, world: &World, ctx: &mut StrategyContext<'_>) -> AssignmentDecision {
        reassign(world, ctx.taxonomy, ctx.scheme, ctx.ledger, ctx.policy, ctx.round)
    }
}

/// Nearest taxi in `taxis` not yet used and compatible with `customer`.
fn nearest_taxi(world: &World, customer: CustomerId, taxis: &[TaxiId], used: &[bool]) -> Option<TaxiId> {
    let origin = world.customer(customer).origin;
    let mut best: Option<(f64, TaxiId)> = None;
    for &t in taxis {
        if used[t.index()] || !world.compatible(t, customer) {
            continue;
        }
        let d = crate::geometry::distance(world.taxi(t).position, origin);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, t));
        }
    }
    best.map(|(_, t)| t)
}

fn nearest_customer(world: &World, taxi: TaxiId, customers: &[CustomerId], taken: &[bool]) -> Option<usize> {
    let pos = world.taxi(taxi).position;
    let mut best: Option<(f64, usize)> = None;
    for (k, &c) in customers.iter().enumerate() {
        if taken[k] || !world.compatible(taxi, c) {
            continue;
        }
        let d = crate::geometry::distance(pos, world.customer(c).origin);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, k));
        }
    }
    best.map(|(_, k)| k)
}

/// The NTNR rule over one pool of taxis and one batch of customers.
/// Marks used taxis in `used`.
fn ntnr_into(
    world: &World,
    taxis: &[TaxiId],
    customers: &[CustomerId],
    used: &mut [bool],
    out: &mut Vec<(TaxiId, CustomerId)>,
) {
    let free = taxis.iter().filter(|t| !used[t.index()]).count();
    if free == 0 || customers.is_empty() {
        return;
    }
    if free >= customers.len() {
        for &c in customers {
            if let Some(t) = nearest_taxi(world, c, taxis, used) {
                used[t.index()] = true;
                out.push((t, c));
            }
        }
    } else {
        let mut taken = vec![false; customers.len()];
        for &t in taxis {
            if used[t.index()] {
                continue;
            }
            if let Some(k) = nearest_customer(world, t, customers, &taken) {
                taken[k] = true;
                used[t.index()] = true;
                out.push((t, customers[k]));
            }
        }
    }
}

/// First come, first served: customers in arrival order each take the
/// nearest compatible idle taxi. A customer nobody can serve does not stop
/// customers of other classes behind it.
pub fn fcfs(world: &World) -> AssignmentDecision {
    let taxis = world.available();
    let mut used = vec![false; world.taxis.len()];
    let mut left = taxis.len();
    let mut out = Vec::new();
    for c in world.unassigned() {
        if left == 0 {
            break;
        }
        if let Some(t) = nearest_taxi(world, c, &taxis, &used) {
            used[t.index()] = true;
            left -= 1;
            out.push((t, c));
        }
    }
    AssignmentDecision::baseline(out)
}

/// Nearest taxi / nearest request: customer-centric while idle taxis are
/// at least as many as waiting customers, taxi-centric otherwise.
pub fn ntnr(world: &World) -> AssignmentDecision {
    let taxis = world.available();
    let customers = world.unassigned();
    let mut used = vec![false; world.taxis.len()];
    let mut out = Vec::new();
    ntnr_into(world, &taxis, &customers, &mut used, &mut out);
    AssignmentDecision::baseline(out)
}

/// NTNR run once per distinct requirement set, most demanding set first,
/// each group drawing on the taxis the earlier groups left over.
pub fn typed_initial_assign(world: &World, taxonomy: &Taxonomy) -> AssignmentDecision {
    let taxis = world.available();
    let customers = world.unassigned();
    let mut used = vec![false; world.taxis.len()];
    let mut out = Vec::new();
    let order = taxonomy.order_requirement_sets(customers.iter().map(|&c| world.customer(c).requirements));
    for req in order {
        let group: Vec<CustomerId> = customers
            .iter()
            .copied()
            .filter(|&c| world.customer(c).requirements == req)
            .collect();
        let pool: Vec<TaxiId> = taxis
            .iter()
            .copied()
            .filter(|t| !used[t.index()] && covers(world.offered[t.index()], req))
            .collect();
        ntnr_into(world, &pool, &group, &mut used, &mut out);
    }
    AssignmentDecision::baseline(out)
}

fn covers(offered: CharSet, req: CharSet) -> bool {
    req.is_subset(offered)
}

/// One mediator round.
///
/// Idle taxis are first matched by [`typed_initial_assign`], giving `A^o`.
/// Participating taxis still driving to their customer are then re-matched
/// by minimum total pickup distance over their customers and every customer
/// left without a taxi. Each taxi whose customer changes is quoted a
/// compensation; the ledger decides whether the whole round goes ahead.
/// Taxis that do not participate, or are already at the pickup point, keep
/// their customers.
pub fn reassign(
    world: &World,
    taxonomy: &Taxonomy,
    scheme: &PricingScheme,
    ledger: &mut MediatorLedger,
    policy: ReassignPolicy,
    round: u64,
) -> AssignmentDecision {
    let initial = typed_initial_assign(world, taxonomy);

    let mut current: Vec<Option<CustomerId>> = world.taxis.iter().map(|t| t.assigned_customer()).collect();
    let mut claimed = vec![false; world.customers.len()];
    for &(t, c) in &initial.pairs {
        current[t.index()] = Some(c);
    }
    for c in current.iter().flatten() {
        claimed[c.index()] = true;
    }

    let rows: Vec<TaxiId> = world
        .taxis
        .iter()
        .filter(|t| t.participates && t.dwell.is_none() && current[t.id.index()].is_some())
        .map(|t| t.id)
        .collect();
    if rows.is_empty() {
        return initial;
    }
    let mut cols: Vec<CustomerId> = rows.iter().filter_map(|t| current[t.index()]).collect();
    cols.extend(world.unassigned().into_iter().filter(|c| !claimed[c.index()]));
    cols.sort_unstable();

    // Each row is shifted by its own minimum; every row is matched, so the
    // optimum is unchanged while all entries stay non-negative. Keeping every
    // row on its own customer then costs `slack`, and no optimal matching
    // can use a shifted entry above it: such cells are dropped, and so are
    // columns left with none, without losing any optimal matching.
    let weighted = policy.revenue_weight > 0.0;
    let rides: Vec<f64> = cols.iter().map(|&c| world.customer(c).ride_km()).collect();
    let mut table: Vec<Vec<(usize, f64)>> = Vec::with_capacity(rows.len());
    let mut slack = 0.0;
    for &t in &rows {
        let own = current[t.index()].expect("rows hold a customer");
        let trip_k = trip_of(world.taxi(t), world.customer(own));
        let revenue_k = if weighted { revenue(scheme, &trip_k, world.customer(own)) } else { 0.0 };
        let mut entries = Vec::new();
        let mut own_cost = 0.0;
        for (k, &c) in cols.iter().enumerate() {
            if !world.compatible(t, c) {
                continue;
            }
            let pickup = world.pickup_distance(t, c);
            let mut v = pickup;
            if c == own {
                own_cost = v;
            } else if weighted {
                let trip_i = Trip::new(pickup, rides[k]);
                let revenue_i = revenue(scheme, &trip_i, world.customer(c));
                v += policy.revenue_weight * scheme.settle_difference(revenue_k, revenue_i, trip_k.total(), trip_i.total());
            }
            entries.push((k, v));
        }
        let low = entries.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
        for e in &mut entries {
            e.1 -= low;
        }
        slack += own_cost - low;
        table.push(entries);
    }
    let bound = slack + 1e-9 * (1.0 + slack);
    let mut kept = vec![usize::MAX; cols.len()];
    let mut kept_cols = Vec::new();
    for row in &mut table {
        row.retain(|e| e.1 <= bound);
        for &(k, _) in row.iter() {
            kept[k] = 0;
        }
    }
    for (k, slot) in kept.iter_mut().enumerate() {
        if *slot == 0 {
            *slot = kept_cols.len();
            kept_cols.push(cols[k]);
        }
    }
    let mut m = CostMatrix::forbidden(rows.len(), kept_cols.len());
    for (r, row) in table.iter().enumerate() {
        for &(k, v) in row {
            m.set(r, kept[k], v).expect("finite costs");
        }
    }
    let cols = kept_cols;
    let best = solve_assignment(&m);

    let mut moved = Vec::new();
    let mut quotes = Vec::new();
    for &(r, k) in &best.pairs {
        let t = rows[r];
        let to = cols[k];
        let from = current[t.index()].expect("rows hold a customer");
        if to == from {
            continue;
        }
        moved.push((t, to));
        quotes.push(quote(world, scheme, t, from, to));
    }
    if moved.is_empty() {
        return initial;
    }

    let mut accepted = vec![false; moved.len()];
    let mut settled = Vec::new();
    let mut rejected = 0;
    let batches = match policy.settlement {
        Settlement::Round => vec![(0..moved.len()).collect()],
        Settlement::Exchange => exchanges(&quotes),
    };
    for batch in batches {
        let proposal: Vec<Compensation> = batch.iter().map(|&e| quotes[e]).collect();
        let (ok, paid) = ledger.settle_round(round, &proposal);
        if ok {
            for &e in &batch {
                accepted[e] = true;
            }
            settled.extend(paid);
        } else {
            rejected += 1;
        }
    }
    let mut pairs: Vec<(TaxiId, CustomerId)> = initial
        .pairs
        .iter()
        .copied()
        .filter(|&(t, _)| !moved.iter().zip(&accepted).any(|(&(mt, _), &ok)| ok && mt == t))
        .collect();
    pairs.extend(moved.iter().zip(&accepted).filter(|(_, &ok)| ok).map(|(&m, _)| m));
    pairs.sort_unstable();
    AssignmentDecision {
        pairs,
        compensations: settled,
        adopted: rejected == 0,
    }
}

/// Splits the moves of a round into independent exchanges: groups of taxis
/// linked by handing customers to one another. Each group can be applied
/// on its own. Groups come cheapest first (most money to the mediator),
/// ties by lowest taxi id.
fn exchanges(quotes: &[Compensation]) -> Vec<Vec<usize>> {
    let n = quotes.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let by_from: std::collections::HashMap<CustomerId, usize> =
        quotes.iter().enumerate().map(|(e, q)| (q.from_customer, e)).collect();
    for (e, q) in quotes.iter().enumerate() {
        if let Some(&f) = by_from.get(&q.to_customer) {
            let (a, b) = (find(&mut parent, e), find(&mut parent, f));
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = std::collections::BTreeMap::new();
    for e in 0..n {
        let root = find(&mut parent, e);
        groups.entry(root).or_default().push(e);
    }
    let mut groups: Vec<(f64, usize, Vec<usize>)> = groups
        .into_iter()
        .map(|(root, g)| (g.iter().map(|&e| quotes[e].amount).sum(), root, g))
        .collect();
    groups.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    groups.into_iter().map(|(_, _, g)| g).collect()
}

fn revenue(scheme: &PricingScheme, trip: &Trip, customer: &CustomerRequest) -> f64 {
    scheme
        .revenue(trip, customer.contracted_price)
        .expect("fixed-price customers carry a contracted price")
}

fn quote(world: &World, scheme: &PricingScheme, taxi: TaxiId, from: CustomerId, to: CustomerId) -> Compensation {
    let pos = world.taxi(taxi).position;
    let k = world.customer(from);
    let i = world.customer(to);
    let trip_k = Trip::between(pos, k.origin, k.destination);
    let trip_i = Trip::between(pos, i.origin, i.destination);
    let amount = scheme
        .compensation(&trip_k, &trip_i, k.contracted_price, i.contracted_price)
        .expect("fixed-price customers carry a contracted price");
    Compensation {
        taxi,
        from_customer: from,
        to_customer: to,
        amount,
    }
}
