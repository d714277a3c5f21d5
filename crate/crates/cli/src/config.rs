//! Text configuration: flat `key = value` lines grouped in `[sections]`.
//!
//! ```text
//! strategy = mindist_reassign
//! n_taxis = 1000
//!
//! [pricing]
//! mode = driver_pays_pickup
//! fare = 1.05
//!
//! [taxonomy]
//! characteristic = Eurotaxi 2
//! characteristic = female-friendly 1
//! characteristic = ramp 0.5
//! subsumption = ramp Eurotaxi
//!
//! [request_mix]
//! normal = 0.65
//! Eurotaxi+female-friendly = 0.35
//!
//! [sweep]
//! demands = 250, 500, 750
//! strategies = ntnr, mindist_reassign
//! repetitions = 10
//! ```
//!
//! Every key is optional; an empty file gives the reference setup. A
//! `[taxonomy]` section replaces the built-in taxonomy, a mix section
//! replaces the built-in mix. `#` starts a comment.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use taxi_dispatch::economics::PricingMode;
use taxi_dispatch::sim::{ConfigError, Mix};
use taxi_dispatch::{CharSet, LedgerMode, SimConfig, StrategyKind, Taxonomy};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigFileError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl From<ConfigError> for ConfigFileError {
    fn from(e: ConfigError) -> Self {
        ConfigFileError::Validation(e.to_string())
    }
}

/// Everything a configuration file describes: the base simulation, the
/// strategy of a single run and the grid of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub base: SimConfig,
    /// Strategy of a single `simulate` run.
    pub strategy: StrategyKind,
    /// Customers per interval.
    pub demands: Vec<usize>,
    pub strategies: Vec<StrategyKind>,
    pub repetitions: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        Self {
            base: SimConfig::default(),
            strategy: StrategyKind::MinDistReassign,
            demands: (250..=1000).step_by(125).collect(),
            strategies: vec![StrategyKind::Fcfs, StrategyKind::Ntnr, StrategyKind::MinDistReassign],
            repetitions: 10,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<(), ConfigFileError> {
        self.base.validate()?;
        if self.repetitions == 0 {
            return Err(ConfigFileError::Validation("repetitions must be at least 1".into()));
        }
        if self.demands.is_empty() {
            return Err(ConfigFileError::Validation("demands must not be empty".into()));
        }
        if self.strategies.is_empty() {
            return Err(ConfigFileError::Validation("strategies must not be empty".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Section {
    Root,
    Taxonomy,
    Pricing,
    Spatial,
    Ledger,
    FleetMix,
    RequestMix,
    Sweep,
}

impl Section {
    fn parse(name: &str) -> Option<Self> {
        Some(match name {
            "taxonomy" => Section::Taxonomy,
            "pricing" => Section::Pricing,
            "spatial" => Section::Spatial,
            "ledger" => Section::Ledger,
            "fleet_mix" => Section::FleetMix,
            "request_mix" => Section::RequestMix,
            "sweep" => Section::Sweep,
            _ => return None,
        })
    }
}

struct Entry<'a> {
    line: usize,
    section: Section,
    key: &'a str,
    value: &'a str,
}

fn err(line: usize, message: impl Into<String>) -> ConfigFileError {
    ConfigFileError::Parse {
        line,
        message: message.into(),
    }
}

fn invalid(message: impl Into<String>) -> ConfigFileError {
    ConfigFileError::Validation(message.into())
}

fn lex(text: &str) -> Result<(Vec<Entry<'_>>, HashSet<Section>), ConfigFileError> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    let mut section = Section::Root;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line, "unterminated section header"))?
                .trim();
            section = Section::parse(name).ok_or_else(|| err(line, format!("unknown section `{name}`")))?;
            if !seen.insert(section) {
                return Err(err(line, format!("section `{name}` appears twice")));
            }
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| err(line, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(err(line, "missing key"));
        }
        entries.push(Entry {
            line,
            section,
            key,
            value,
        });
    }
    Ok((entries, seen))
}

fn number(e: &Entry) -> Result<f64, ConfigFileError> {
    e.value
        .parse::<f64>()
        .map_err(|_| err(e.line, format!("`{}` expects a number, got `{}`", e.key, e.value)))
}

fn count(e: &Entry) -> Result<usize, ConfigFileError> {
    let v: i64 = e
        .value
        .parse()
        .map_err(|_| err(e.line, format!("`{}` expects an integer, got `{}`", e.key, e.value)))?;
    usize::try_from(v).map_err(|_| invalid(format!("{} must be >= 0, got {v}", e.key)))
}

fn parsed<T: FromStr>(e: &Entry) -> Result<T, ConfigFileError>
where
    T::Err: std::fmt::Display,
{
    e.value.parse::<T>().map_err(|x| err(e.line, x.to_string()))
}

fn list<T: FromStr>(e: &Entry) -> Result<Vec<T>, ConfigFileError>
where
    T::Err: std::fmt::Display,
{
    e.value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|x| err(e.line, format!("`{}`: {x}", e.key))))
        .collect()
}

/// Requirement set from a class label: `normal` or names joined by `+`.
fn class_set(taxonomy: &Taxonomy, label: &str) -> Result<CharSet, String> {
    if label == "normal" {
        return Ok(CharSet::EMPTY);
    }
    let names: Vec<&str> = label.split('+').map(str::trim).collect();
    taxonomy.set_of(&names).map_err(|e| e.to_string())
}

/// The built-in mix, by class label.
const DEFAULT_MIX: [(&str, f64); 4] = [
    ("normal", 0.65),
    ("female-friendly", 0.20),
    ("Eurotaxi", 0.10),
    ("Eurotaxi+female-friendly", 0.05),
];

fn default_mix(name: &str, taxonomy: &Taxonomy) -> Result<Mix, ConfigFileError> {
    DEFAULT_MIX
        .iter()
        .map(|&(label, f)| {
            class_set(taxonomy, label)
                .map(|s| (s, f))
                .map_err(|_| invalid(format!("[{name}] is required when the taxonomy lacks `{label}`")))
        })
        .collect()
}

pub fn parse_config(text: &str) -> Result<ExperimentPlan, ConfigFileError> {
    let (entries, sections) = lex(text)?;
    let mut plan = ExperimentPlan::default();
    let mut unique = HashSet::new();
    for e in &entries {
        let repeatable = e.section == Section::Taxonomy;
        if !repeatable && !unique.insert((e.section, e.key)) {
            return Err(err(e.line, format!("`{}` is set twice", e.key)));
        }
    }

    let c = &mut plan.base;
    let mut center = (None, None);
    let mut ledger_mode = None;
    let mut ledger_initial = None;
    for e in entries.iter().filter(|e| !matches!(e.section, Section::Taxonomy | Section::FleetMix | Section::RequestMix)) {
        match (e.section, e.key) {
            (Section::Root, "strategy") => plan.strategy = parsed(e)?,
            (Section::Root, "width") => c.width = number(e)?,
            (Section::Root, "height") => c.height = number(e)?,
            (Section::Root, "n_taxis") => c.n_taxis = count(e)?,
            (Section::Root, "duration") => c.duration = number(e)?,
            (Section::Root, "tick") => c.tick = number(e)?,
            (Section::Root, "speed") => c.speed = number(e)?,
            (Section::Root, "customers_per_interval") => c.customers_per_interval = count(e)?,
            (Section::Root, "interval") => c.interval = number(e)?,
            (Section::Root, "pickup_time") => c.pickup_time = number(e)?,
            (Section::Root, "dropoff_time") => c.dropoff_time = number(e)?,
            (Section::Root, "participation_fraction") => c.participation_fraction = number(e)?,
            (Section::Root, "seed") => c.seed = parsed(e)?,
            (Section::Root, "settlement") => c.settlement = parsed(e)?,
            (Section::Root, "revenue_weight") => c.revenue_weight = Some(number(e)?),
            (Section::Pricing, "mode") => c.pricing.mode = parsed::<PricingMode>(e)?,
            (Section::Pricing, "fcost") => c.pricing.fcost = number(e)?,
            (Section::Pricing, "fare") => c.pricing.fare = number(e)?,
            (Section::Pricing, "cost") => c.pricing.cost = number(e)?,
            (Section::Spatial, "center_x") => center.0 = Some(number(e)?),
            (Section::Spatial, "center_y") => center.1 = Some(number(e)?),
            (Section::Spatial, "sigma_center") => c.spatial.sigma_center = number(e)?,
            (Section::Spatial, "sigma_outskirts") => c.spatial.sigma_outskirts = number(e)?,
            (Section::Spatial, "central_radius") => c.spatial.central_radius = number(e)?,
            (Section::Ledger, "mode") => ledger_mode = Some((e.line, e.value)),
            (Section::Ledger, "initial") => ledger_initial = Some(number(e)?),
            (Section::Sweep, "demands") => plan.demands = list(e)?,
            (Section::Sweep, "strategies") => plan.strategies = list(e)?,
            (Section::Sweep, "repetitions") => plan.repetitions = count(e)?,
            (Section::Sweep, "output_dir") => plan.output_dir = PathBuf::from(e.value),
            _ => return Err(err(e.line, format!("unknown key `{}`", e.key))),
        }
    }
    c.spatial.center.x = center.0.unwrap_or(c.width / 2.0);
    c.spatial.center.y = center.1.unwrap_or(c.height / 2.0);
    c.ledger = match (ledger_mode, ledger_initial) {
        (None, None) => LedgerMode::BudgetGated,
        (None, Some(_)) => return Err(invalid("[ledger] initial needs mode = subsidized")),
        (Some((_, "budget_gated")), None) => LedgerMode::BudgetGated,
        (Some((_, "forced_no_compensation")), None) => LedgerMode::ForcedNoCompensation,
        (Some((_, "subsidized")), Some(initial)) => LedgerMode::Subsidized { initial },
        (Some((_, "subsidized")), None) => return Err(invalid("subsidized ledger needs an initial balance")),
        (Some((_, "budget_gated" | "forced_no_compensation")), Some(_)) => {
            return Err(invalid("[ledger] initial needs mode = subsidized"))
        }
        (Some((line, other)), _) => return Err(err(line, format!("unknown ledger mode `{other}`"))),
    };

    if sections.contains(&Section::Taxonomy) {
        c.taxonomy = parse_taxonomy(&entries)?;
    }
    c.fleet_mix = parse_mix(&entries, Section::FleetMix, &sections, "fleet_mix", &c.taxonomy)?;
    c.request_mix = parse_mix(&entries, Section::RequestMix, &sections, "request_mix", &c.taxonomy)?;

    plan.validate()?;
    Ok(plan)
}

fn parse_taxonomy(entries: &[Entry]) -> Result<Taxonomy, ConfigFileError> {
    let mut t = Taxonomy::new();
    let lines: Vec<&Entry> = entries.iter().filter(|e| e.section == Section::Taxonomy).collect();
    let pair = |e: &Entry| -> Result<(String, String), ConfigFileError> {
        let words: Vec<&str> = e.value.split_whitespace().collect();
        match words[..] {
            [a, b] => Ok((a.to_string(), b.to_string())),
            _ => Err(err(e.line, format!("`{}` expects two words", e.key))),
        }
    };
    // Characteristics first, so subsumptions may name later declarations.
    for e in lines.iter().filter(|e| e.key == "characteristic") {
        let (name, priority) = pair(e)?;
        let priority: f64 = priority
            .parse()
            .map_err(|_| err(e.line, format!("priority of `{name}` must be a number")))?;
        t.add_characteristic(&name, priority).map_err(|x| err(e.line, x.to_string()))?;
    }
    for e in lines.iter().filter(|e| e.key != "characteristic") {
        let (a, b) = pair(e)?;
        match e.key {
            "subsumption" => t.add_subsumption(&a, &b),
            "priority" => {
                let p: f64 = b.parse().map_err(|_| err(e.line, "priority must be a number"))?;
                t.set_priority(&a, p)
            }
            other => return Err(err(e.line, format!("unknown key `{other}`"))),
        }
        .map_err(|x| err(e.line, x.to_string()))?;
    }
    Ok(t)
}

fn parse_mix(
    entries: &[Entry],
    section: Section,
    present: &HashSet<Section>,
    name: &str,
    taxonomy: &Taxonomy,
) -> Result<Mix, ConfigFileError> {
    if !present.contains(&section) {
        return default_mix(name, taxonomy);
    }
    entries
        .iter()
        .filter(|e| e.section == section)
        .map(|e| {
            let set = class_set(taxonomy, e.key).map_err(|x| err(e.line, x))?;
            Ok((set, number(e)?))
        })
        .collect()
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

/// Writes `plan` in the format read by [`parse_config`]; parsing the output
/// gives back an equal plan.
pub fn serialize_config(plan: &ExperimentPlan) -> String {
    let c = &plan.base;
    let mut s = String::new();
    let _ = writeln!(s, "strategy = {}", plan.strategy);
    let _ = writeln!(s, "width = {}", c.width);
    let _ = writeln!(s, "height = {}", c.height);
    let _ = writeln!(s, "n_taxis = {}", c.n_taxis);
    let _ = writeln!(s, "duration = {}", c.duration);
    let _ = writeln!(s, "tick = {}", c.tick);
    let _ = writeln!(s, "speed = {}", c.speed);
    let _ = writeln!(s, "customers_per_interval = {}", c.customers_per_interval);
    let _ = writeln!(s, "interval = {}", c.interval);
    let _ = writeln!(s, "pickup_time = {}", c.pickup_time);
    let _ = writeln!(s, "dropoff_time = {}", c.dropoff_time);
    let _ = writeln!(s, "participation_fraction = {}", c.participation_fraction);
    let _ = writeln!(s, "seed = {}", c.seed);
    let _ = writeln!(s, "settlement = {}", c.settlement);
    if let Some(w) = c.revenue_weight {
        let _ = writeln!(s, "revenue_weight = {w}");
    }

    let p = &c.pricing;
    let _ = writeln!(s, "\n[pricing]\nmode = {}\nfcost = {}\nfare = {}\ncost = {}", p.mode, p.fcost, p.fare, p.cost);
    let _ = writeln!(s, "\n[ledger]\nmode = {}", c.ledger.name());
    if let LedgerMode::Subsidized { initial } = c.ledger {
        let _ = writeln!(s, "initial = {initial}");
    }
    let sp = &c.spatial;
    let _ = writeln!(
        s,
        "\n[spatial]\ncenter_x = {}\ncenter_y = {}\nsigma_center = {}\nsigma_outskirts = {}\ncentral_radius = {}",
        sp.center.x, sp.center.y, sp.sigma_center, sp.sigma_outskirts, sp.central_radius
    );

    s.push_str("\n[taxonomy]\n");
    for (_, name, priority) in c.taxonomy.characteristics() {
        let _ = writeln!(s, "characteristic = {name} {priority}");
    }
    for (narrower, broader) in c.taxonomy.subsumptions() {
        let _ = writeln!(s, "subsumption = {narrower} {broader}");
    }
    for (name, mix) in [("fleet_mix", &c.fleet_mix), ("request_mix", &c.request_mix)] {
        let _ = writeln!(s, "\n[{name}]");
        for (set, f) in mix {
            let _ = writeln!(s, "{} = {f}", c.taxonomy.class_name(*set));
        }
    }

    let _ = writeln!(
        s,
        "\n[sweep]\ndemands = {}\nstrategies = {}\nrepetitions = {}\noutput_dir = {}",
        join(&plan.demands),
        join(&plan.strategies),
        plan.repetitions,
        plan.output_dir.display()
    );
    s
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentPlan, ConfigFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigFileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_the_reference_setup() {
        let plan = parse_config("").unwrap();
        assert_eq!(plan, ExperimentPlan::default());
        let c = &plan.base;
        assert_eq!((c.n_taxis, c.width, c.height, c.speed), (1000, 9.0, 9.0, 17.0));
        assert_eq!((c.pricing.fcost, c.pricing.fare, c.pricing.cost), (2.4, 1.05, 0.2));
        assert_eq!(plan.demands, vec![250, 375, 500, 625, 750, 875, 1000]);
    }

    #[test]
    fn negative_count_is_a_validation_error() {
        assert!(matches!(parse_config("n_taxis = -5"), Err(ConfigFileError::Validation(_))));
    }

    #[test]
    fn strategy_key() {
        let plan = parse_config("strategy = mindist_reassign\n").unwrap();
        assert_eq!(plan.strategy, StrategyKind::MinDistReassign);
        let plan = parse_config("strategy = fcfs # baseline").unwrap();
        assert_eq!(plan.strategy, StrategyKind::Fcfs);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let cases = [
            ("n_taxis = 10\nspeed = fast", 2),
            ("\n\nbogus = 1", 3),
            ("[pricing]\nmode = free", 2),
            ("[nowhere]", 1),
            ("width = 1\nwidth = 2", 2),
            ("just words", 1),
            ("[taxonomy]\ncharacteristic = a 1\nsubsumption = a b", 3),
            ("[request_mix]\nnormal = 0.5\nwings = 0.5", 3),
        ];
        for (text, expected) in cases {
            match parse_config(text) {
                Err(ConfigFileError::Parse { line, .. }) => assert_eq!(line, expected, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn mix_must_sum_to_one() {
        let e = parse_config("[request_mix]\nnormal = 0.5\nEurotaxi = 0.2").unwrap_err();
        assert!(matches!(e, ConfigFileError::Validation(_)), "{e}");
    }

    #[test]
    fn custom_taxonomy_and_sections() {
        let text = "
            width = 4
            [taxonomy]
            characteristic = Eurotaxi 2
            characteristic = ramp 1
            subsumption = ramp Eurotaxi
            [fleet_mix]
            normal = 0.5
            Eurotaxi = 0.5
            [request_mix]
            ramp = 1
            [ledger]
            mode = subsidized
            initial = 100
            [sweep]
            demands = 62, 125
            strategies = ntnr
            repetitions = 2
        ";
        let plan = parse_config(text).unwrap();
        let c = &plan.base;
        let ramp = c.taxonomy.set_of(&["ramp"]).unwrap();
        let euro = c.taxonomy.set_of(&["Eurotaxi"]).unwrap();
        assert!(c.taxonomy.compatible(euro, ramp));
        assert_eq!(c.request_mix, vec![(ramp, 1.0)]);
        assert_eq!(c.spatial.center.x, 2.0);
        assert_eq!(c.ledger, LedgerMode::Subsidized { initial: 100.0 });
        assert_eq!(plan.demands, vec![62, 125]);
        assert_eq!(plan.strategies, vec![StrategyKind::Ntnr]);
    }

    #[test]
    fn replaced_taxonomy_needs_its_own_mixes() {
        let e = parse_config("[taxonomy]\ncharacteristic = ramp 1").unwrap_err();
        assert!(matches!(e, ConfigFileError::Validation(_)));
    }

    #[test]
    fn serialization_round_trips() {
        let mut plan = parse_config("").unwrap();
        assert_eq!(parse_config(&serialize_config(&plan)).unwrap(), plan);

        plan.base.ledger = LedgerMode::Subsidized { initial: 12.5 };
        plan.base.revenue_weight = Some(0.1 + 0.2);
        plan.base.spatial.sigma_outskirts = 1.0 / 3.0;
        plan.base.width = 7.3;
        plan.demands = vec![1, 2];
        plan.strategy = StrategyKind::TypedNtnr;
        assert_eq!(parse_config(&serialize_config(&plan)).unwrap(), plan);
    }

    #[test]
    fn ledger_modes() {
        let plan = parse_config("[ledger]\nmode = forced_no_compensation").unwrap();
        assert_eq!(plan.base.ledger, LedgerMode::ForcedNoCompensation);
        assert!(parse_config("[ledger]\nmode = subsidized").is_err());
        assert!(parse_config("[ledger]\ninitial = 5").is_err());
    }

    #[test]
    fn plan_invariants() {
        assert!(matches!(parse_config("[sweep]\nrepetitions = 0"), Err(ConfigFileError::Validation(_))));
        assert!(matches!(parse_config("[sweep]\ndemands ="), Err(ConfigFileError::Validation(_))));
    }
}
