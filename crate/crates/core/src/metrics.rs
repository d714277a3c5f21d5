//! Trip records, per-run statistics and the cross-run summary table.
//!
//! A run's statistics are a pure function of its [`TripRecord`]s and its
//! [`RunMeta`], so record dumps can be re-aggregated later.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use thiserror::Error;

use crate::economics::LedgerEntry;
use crate::model::{CustomerId, TaxiId};

/// Summary rows carry this class name for the run-wide figures.
pub const ALL_CLASSES: &str = "all";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("customer {0} completed twice")]
    DuplicateTrip(CustomerId),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record: {0}")]
    Malformed(String),
}

/// One completed trip.
#[derive(Clone, Debug, PartialEq)]
pub struct TripRecord {
    pub customer: CustomerId,
    pub taxi: TaxiId,
    /// Requirement class name, e.g. `normal` or `Eurotaxi+female-friendly`.
    pub class: String,
    /// Seconds from the call to the taxi's arrival at the pickup point.
    pub wait_s: f64,
    pub empty_km: f64,
    pub occupied_km: f64,
    pub fare_paid: f64,
    /// Trip revenue plus compensations settled for this job.
    pub taxi_income: f64,
    pub taxi_participates: bool,
    pub reassignments: u32,
}

/// Streaming collector that refuses a customer twice.
#[derive(Clone, Debug, Default)]
pub struct TripLog {
    records: Vec<TripRecord>,
    seen: HashSet<CustomerId>,
}

impl TripLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, trip: TripRecord) -> Result<(), MetricsError> {
        if !self.seen.insert(trip.customer) {
            return Err(MetricsError::DuplicateTrip(trip.customer));
        }
        self.records.push(trip);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[TripRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TripRecord> {
        self.records
    }
}

/// Facts about a run that the trip records alone do not carry.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMeta {
    pub strategy: String,
    pub demand_per_hour: f64,
    pub seed: u64,
    pub taxis_participating: usize,
    pub taxis_non_participating: usize,
    pub mediator_balance: f64,
    /// Customers still waiting at the end, by class. Lists every class of
    /// the request mix, so classes with no traffic still get a row.
    pub unserved: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassStats {
    pub mean_wait_min: Option<f64>,
    pub served: usize,
    pub unserved: usize,
}

/// Statistics of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunStats {
    pub meta: RunMeta,
    /// Keyed by class name, plus [`ALL_CLASSES`].
    pub classes: BTreeMap<String, ClassStats>,
    pub empty_km_per_1000: Option<f64>,
    /// Mean income per taxi of each group, scaled to 1000 served customers.
    pub income_participating_per_1000: Option<f64>,
    pub income_non_participating_per_1000: Option<f64>,
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl RunStats {
    pub fn from_records(records: &[TripRecord], meta: RunMeta) -> Self {
        let mut classes: BTreeMap<String, ClassStats> = BTreeMap::new();
        let mut names: Vec<&str> = meta.unserved.keys().map(String::as_str).collect();
        names.extend(records.iter().map(|r| r.class.as_str()));
        names.sort_unstable();
        names.dedup();
        for name in names {
            let waits = records.iter().filter(|r| r.class == name).map(|r| r.wait_s / 60.0);
            let served = records.iter().filter(|r| r.class == name).count();
            classes.insert(
                name.to_string(),
                ClassStats {
                    mean_wait_min: mean(waits),
                    served,
                    unserved: meta.unserved.get(name).copied().unwrap_or(0),
                },
            );
        }
        let served = records.len();
        classes.insert(
            ALL_CLASSES.to_string(),
            ClassStats {
                mean_wait_min: mean(records.iter().map(|r| r.wait_s / 60.0)),
                served,
                unserved: meta.unserved.values().sum(),
            },
        );
        let per_1000 = |total: f64| (served > 0).then(|| total * 1000.0 / served as f64);
        let group_income = |participates: bool, taxis: usize| {
            let total: f64 = records
                .iter()
                .filter(|r| r.taxi_participates == participates)
                .map(|r| r.taxi_income)
                .sum();
            if taxis == 0 {
                None
            } else {
                per_1000(total / taxis as f64)
            }
        };
        Self {
            empty_km_per_1000: per_1000(records.iter().map(|r| r.empty_km).sum()),
            income_participating_per_1000: group_income(true, meta.taxis_participating),
            income_non_participating_per_1000: group_income(false, meta.taxis_non_participating),
            classes,
            meta,
        }
    }
}

/// One line of the summary table: a (strategy, demand, class) cell
/// averaged over its runs.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub strategy: String,
    pub demand_per_hour: f64,
    pub class: String,
    pub mean_wait_min: Option<f64>,
    pub served: f64,
    pub unserved: f64,
    pub empty_km_per_1000: Option<f64>,
    pub income_participating_per_1000: Option<f64>,
    pub income_non_participating_per_1000: Option<f64>,
    pub mediator_balance: f64,
    pub runs: usize,
}

fn mean_present(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    mean(values.into_iter().flatten())
}

/// Averages runs per (strategy, demand, class), every run weighing the same.
/// A figure absent in some runs is averaged over the runs that have it, and
/// stays absent if none do. Rows come out sorted by strategy, demand and
/// class name.
pub fn aggregate(runs: &[RunStats]) -> Vec<ReportRow> {
    let mut cells: BTreeMap<(String, u64, String), Vec<&RunStats>> = BTreeMap::new();
    for run in runs {
        for class in run.classes.keys() {
            cells
                .entry((run.meta.strategy.clone(), run.meta.demand_per_hour.to_bits(), class.clone()))
                .or_default()
                .push(run);
        }
    }
    let mut rows: Vec<ReportRow> = cells
        .into_iter()
        .map(|((strategy, demand, class), group)| {
            let cs = |r: &RunStats| r.classes[&class].clone();
            ReportRow {
                mean_wait_min: mean_present(group.iter().map(|r| cs(r).mean_wait_min)),
                served: mean(group.iter().map(|r| cs(r).served as f64)).unwrap_or(0.0),
                unserved: mean(group.iter().map(|r| cs(r).unserved as f64)).unwrap_or(0.0),
                empty_km_per_1000: mean_present(group.iter().map(|r| r.empty_km_per_1000)),
                income_participating_per_1000: mean_present(group.iter().map(|r| r.income_participating_per_1000)),
                income_non_participating_per_1000: mean_present(
                    group.iter().map(|r| r.income_non_participating_per_1000),
                ),
                mediator_balance: mean(group.iter().map(|r| r.meta.mediator_balance)).unwrap_or(0.0),
                runs: group.len(),
                strategy,
                demand_per_hour: f64::from_bits(demand),
                class,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        a.strategy
            .cmp(&b.strategy)
            .then(a.demand_per_hour.total_cmp(&b.demand_per_hour))
            .then(a.class.cmp(&b.class))
    });
    rows
}

pub const SUMMARY_HEADER: [&str; 11] = [
    "strategy",
    "demand_per_hour",
    "class",
    "mean_wait_min",
    "served",
    "unserved",
    "empty_km_per_1000",
    "income_participating_per_1000",
    "income_non_participating_per_1000",
    "mediator_balance",
    "runs",
];

fn fixed(v: f64) -> String {
    format!("{v:.6}")
}

fn fixed_opt(v: Option<f64>) -> String {
    v.map(fixed).unwrap_or_default()
}

/// Summary table as CSV, six decimals, absent values left empty.
pub fn write_summary<W: Write>(rows: &[ReportRow], out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.strategy.clone(),
            format!("{}", r.demand_per_hour),
            r.class.clone(),
            fixed_opt(r.mean_wait_min),
            fixed(r.served),
            fixed(r.unserved),
            fixed_opt(r.empty_km_per_1000),
            fixed_opt(r.income_participating_per_1000),
            fixed_opt(r.income_non_participating_per_1000),
            fixed(r.mediator_balance),
            r.runs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const RECORD_HEADER: [&str; 10] = [
    "customer",
    "taxi",
    "class",
    "wait_s",
    "empty_km",
    "occupied_km",
    "fare_paid",
    "taxi_income",
    "taxi_participates",
    "reassignments",
];

/// Per-trip dump. Floats use the shortest representation that reads back
/// to the same value, so re-aggregating a dump reproduces the run exactly.
pub fn write_records<W: Write>(records: &[TripRecord], out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.write_record([
            r.customer.0.to_string(),
            r.taxi.0.to_string(),
            r.class.clone(),
            r.wait_s.to_string(),
            r.empty_km.to_string(),
            r.occupied_km.to_string(),
            r.fare_paid.to_string(),
            r.taxi_income.to_string(),
            r.taxi_participates.to_string(),
            r.reassignments.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T, MetricsError> {
    let raw = rec.get(i).ok_or_else(|| MetricsError::Malformed(format!("missing column {}", RECORD_HEADER[i])))?;
    raw.parse()
        .map_err(|_| MetricsError::Malformed(format!("{} = {raw:?}", RECORD_HEADER[i])))
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<TripRecord>, MetricsError> {
    let mut r = csv::Reader::from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(RECORD_HEADER) {
        return Err(MetricsError::Malformed(format!("unexpected header {header:?}")));
    }
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(TripRecord {
                customer: CustomerId(field(&rec, 0)?),
                taxi: TaxiId(field(&rec, 1)?),
                class: field(&rec, 2)?,
                wait_s: field(&rec, 3)?,
                empty_km: field(&rec, 4)?,
                occupied_km: field(&rec, 5)?,
                fare_paid: field(&rec, 6)?,
                taxi_income: field(&rec, 7)?,
                taxi_participates: field(&rec, 8)?,
                reassignments: field(&rec, 9)?,
            })
        })
        .collect()
}

/// Compensation history: round, taxi, from_customer, to_customer, amount.
pub fn write_compensations<W: Write>(entries: &[LedgerEntry], out: W) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["round", "taxi", "from_customer", "to_customer", "amount"])?;
    for e in entries {
        let c = &e.compensation;
        w.write_record([
            e.round.to_string(),
            c.taxi.0.to_string(),
            c.from_customer.0.to_string(),
            c.to_customer.0.to_string(),
            fixed(c.amount),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// File name of a record dump.
pub fn records_file_name(strategy: &str, demand_per_hour: f64, seed: u64) -> String {
    format!("{strategy}_{demand_per_hour}_{seed}.csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trip(customer: u32, class: &str, wait_min: f64, empty_km: f64) -> TripRecord {
        TripRecord {
            customer: CustomerId(customer),
            taxi: TaxiId(customer % 3),
            class: class.to_string(),
            wait_s: wait_min * 60.0,
            empty_km,
            occupied_km: 3.0,
            fare_paid: 5.55,
            taxi_income: 4.3,
            taxi_participates: customer.is_multiple_of(2),
            reassignments: 0,
        }
    }

    fn meta(strategy: &str, balance: f64) -> RunMeta {
        RunMeta {
            strategy: strategy.to_string(),
            demand_per_hour: 2500.0,
            seed: 0,
            taxis_participating: 2,
            taxis_non_participating: 1,
            mediator_balance: balance,
            unserved: BTreeMap::from([("normal".to_string(), 0)]),
        }
    }

    #[test]
    fn log_guards_duplicates() {
        let mut log = TripLog::new();
        log.record(trip(1, "normal", 1.0, 0.5)).unwrap();
        assert_eq!(log.len(), 1);
        assert!(matches!(log.record(trip(1, "normal", 2.0, 0.5)), Err(MetricsError::DuplicateTrip(_))));
    }

    #[test]
    fn mean_wait() {
        let records: Vec<_> = (1..=10).map(|i| trip(i, "normal", i as f64, 0.1)).collect();
        let stats = RunStats::from_records(&records, meta("ntnr", 0.0));
        let w = stats.classes["normal"].mean_wait_min.unwrap();
        assert!((w - 5.5).abs() < 1e-12);
        assert_eq!(stats.classes[ALL_CLASSES].served, 10);
    }

    #[test]
    fn empty_km_normalization() {
        let records: Vec<_> = (0..2000).map(|i| trip(i, "normal", 1.0, 0.544)).collect();
        let stats = RunStats::from_records(&records, meta("ntnr", 0.0));
        assert!((stats.empty_km_per_1000.unwrap() - 544.0).abs() < 1e-9);
    }

    #[test]
    fn no_service_means_absent() {
        let stats = RunStats::from_records(&[], meta("ntnr", 0.0));
        assert_eq!(stats.classes["normal"].mean_wait_min, None);
        assert_eq!(stats.empty_km_per_1000, None);
        assert_eq!(stats.income_participating_per_1000, None);
        let rows = aggregate(&[stats]);
        let mut out = Vec::new();
        write_summary(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("ntnr,2500,all,,0.000000,"));
    }

    #[test]
    fn equal_weight_across_runs() {
        let a = RunStats::from_records(&[trip(0, "normal", 4.0, 1.0)], meta("ntnr", 1.0));
        let b = RunStats::from_records(
            &[trip(0, "normal", 6.0, 1.0), trip(1, "normal", 6.0, 1.0), trip(2, "normal", 6.0, 1.0)],
            meta("ntnr", 3.0),
        );
        let rows = aggregate(&[a, b]);
        let normal = rows.iter().find(|r| r.class == "normal").unwrap();
        assert!((normal.mean_wait_min.unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(normal.runs, 2);
        assert_eq!(normal.mediator_balance, 2.0);
        assert_eq!(normal.served, 2.0);
    }

    #[test]
    fn income_split_by_participation() {
        let records: Vec<_> = (0..4).map(|i| trip(i, "normal", 1.0, 1.0)).collect();
        let stats = RunStats::from_records(&records, meta("ntnr", 0.0));
        // Two trips each way, 4.3 each; two participating taxis, one not.
        assert!((stats.income_participating_per_1000.unwrap() - 4.3 * 1000.0 / 4.0).abs() < 1e-9);
        assert!((stats.income_non_participating_per_1000.unwrap() - 8.6 * 1000.0 / 4.0).abs() < 1e-9);
    }

    #[test]
    fn summary_rows_sorted_and_formatted() {
        let runs = vec![
            RunStats::from_records(&[trip(0, "normal", 2.6, 1.0)], meta("ntnr", 0.0)),
            RunStats::from_records(&[trip(0, "normal", 2.6, 1.0)], meta("mindist_reassign", 0.0)),
        ];
        let rows = aggregate(&runs);
        let mut out = Vec::new();
        write_summary(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SUMMARY_HEADER.join(","));
        assert!(lines[1].starts_with("mindist_reassign,2500,all,2.600000,"));
        assert!(lines[2].starts_with("mindist_reassign,2500,normal,2.600000,"));
        assert!(lines[3].starts_with("ntnr,2500,all,"));

        let mut empty = Vec::new();
        write_summary(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().lines().count(), 1);
    }

    #[test]
    fn records_round_trip() {
        let records: Vec<_> = (0..20)
            .map(|i| {
                let mut t = trip(i, if i % 3 == 0 { "Eurotaxi+female-friendly" } else { "normal" }, 0.1 * i as f64 + 1.0 / 3.0, 0.7 / (i + 1) as f64);
                t.taxi_income = -0.1 + i as f64 / 7.0;
                t
            })
            .collect();
        let mut buf = Vec::new();
        write_records(&records, &mut buf).unwrap();
        let back = read_records(buf.as_slice()).unwrap();
        assert_eq!(back, records);
        let m = meta("ntnr", 0.0);
        assert_eq!(
            aggregate(&[RunStats::from_records(&back, m.clone())]),
            aggregate(&[RunStats::from_records(&records, m)])
        );
    }

    #[test]
    fn file_names() {
        assert_eq!(records_file_name("ntnr", 2500.0, 3), "ntnr_2500_3.csv");
    }
}
