//! Taxi characteristic taxonomy.
//!
//! A taxonomy is a set of named characteristics with a subsumption relation
//! `narrower ⊑ broader` ("a taxi offering `broader` can also serve requests
//! for `narrower`") and a priority per characteristic. Only the direct edges
//! are stored; closures are computed on demand.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

/// Upper bound on the number of characteristics; sets are 64-bit masks.
pub const MAX_CHARACTERISTICS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TaxonomyError {
    #[error("subsumption relation contains a cycle through `{0}`")]
    Cycle(String),
    #[error("`{narrower}` ⊑ `{broader}` but priority {narrower_priority} > {broader_priority}")]
    PriorityViolation {
        narrower: String,
        broader: String,
        narrower_priority: f64,
        broader_priority: f64,
    },
    #[error("unknown characteristic `{0}`")]
    UnknownCharacteristic(String),
    #[error("characteristic `{0}` declared twice")]
    Duplicate(String),
    #[error("at most {MAX_CHARACTERISTICS} characteristics are supported")]
    TooMany,
}

/// Index of a characteristic inside its taxonomy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CharId(u8);

impl CharId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A set of characteristics of one taxonomy, stored as a bit mask.
///
/// Used both for a taxi's declared characteristics and for a customer's
/// requirement set. The empty set is a "normal" request.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CharSet(u64);

impl CharSet {
    pub const EMPTY: CharSet = CharSet(0);

    pub fn from_bits(bits: u64) -> Self {
        CharSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn with(self, id: CharId) -> Self {
        CharSet(self.0 | (1u64 << id.0))
    }

    pub fn contains(self, id: CharId) -> bool {
        self.0 & (1u64 << id.0) != 0
    }

    #[inline]
    pub fn is_subset(self, other: CharSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn union(self, other: CharSet) -> Self {
        CharSet(self.0 | other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = CharId> {
        (0..64u8).filter(move |i| self.0 & (1u64 << i) != 0).map(CharId)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Taxonomy {
    names: Vec<String>,
    priorities: Vec<f64>,
    /// Direct edges `(narrower, broader)`.
    subsumptions: Vec<(CharId, CharId)>,
}

impl Default for Taxonomy {
    fn default() -> Self {
        Self::new()
    }
}

impl Taxonomy {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            priorities: Vec::new(),
            subsumptions: Vec::new(),
        }
    }

    /// The flat two-trait taxonomy used by the reference experiments:
    /// `Eurotaxi` (priority 2) and `female-friendly` (priority 1).
    pub fn experiment_default() -> Self {
        let mut t = Self::new();
        t.add_characteristic("Eurotaxi", 2.0).expect("fresh taxonomy");
        t.add_characteristic("female-friendly", 1.0)
            .expect("fresh taxonomy");
        t
    }

    pub fn add_characteristic(&mut self, name: &str, priority: f64) -> Result<CharId, TaxonomyError> {
        if self.names.iter().any(|n| n == name) {
            return Err(TaxonomyError::Duplicate(name.to_string()));
        }
        if self.names.len() >= MAX_CHARACTERISTICS {
            return Err(TaxonomyError::TooMany);
        }
        self.names.push(name.to_string());
        self.priorities.push(priority);
        Ok(CharId((self.names.len() - 1) as u8))
    }

    /// Declares `narrower ⊑ broader`.
    pub fn add_subsumption(&mut self, narrower: &str, broader: &str) -> Result<(), TaxonomyError> {
        let n = self.require(narrower)?;
        let b = self.require(broader)?;
        if !self.subsumptions.contains(&(n, b)) {
            self.subsumptions.push((n, b));
        }
        Ok(())
    }

    pub fn set_priority(&mut self, name: &str, priority: f64) -> Result<(), TaxonomyError> {
        let id = self.require(name)?;
        self.priorities[id.index()] = priority;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<CharId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| CharId(i as u8))
    }

    fn require(&self, name: &str) -> Result<CharId, TaxonomyError> {
        self.id(name)
            .ok_or_else(|| TaxonomyError::UnknownCharacteristic(name.to_string()))
    }

    pub fn name(&self, id: CharId) -> &str {
        &self.names[id.index()]
    }

    pub fn priority(&self, id: CharId) -> f64 {
        self.priorities[id.index()]
    }

    pub fn characteristics(&self) -> impl Iterator<Item = (CharId, &str, f64)> + '_ {
        self.names
            .iter()
            .zip(&self.priorities)
            .enumerate()
            .map(|(i, (n, p))| (CharId(i as u8), n.as_str(), *p))
    }

    /// Direct subsumption edges as `(narrower, broader)` names.
    pub fn subsumptions(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.subsumptions
            .iter()
            .map(|&(n, b)| (self.name(n), self.name(b)))
    }

    /// Resolves a list of names into a set.
    pub fn set_of<S: AsRef<str>>(&self, names: &[S]) -> Result<CharSet, TaxonomyError> {
        names
            .iter()
            .try_fold(CharSet::EMPTY, |acc, n| Ok(acc.with(self.require(n.as_ref())?)))
    }

    /// Names of the members of `set`, sorted.
    pub fn names_of(&self, set: CharSet) -> Vec<&str> {
        let mut v: Vec<&str> = set
            .iter()
            .filter(|id| id.index() < self.len())
            .map(|id| self.name(id))
            .collect();
        v.sort_unstable();
        v
    }

    /// Stable label for a requirement class: `normal` for the empty set,
    /// otherwise the sorted member names joined by `+`.
    pub fn class_name(&self, set: CharSet) -> String {
        if set.is_empty() {
            "normal".to_string()
        } else {
            self.names_of(set).join("+")
        }
    }

    /// Checks that `⊑` is acyclic and that priorities are monotone over it.
    pub fn validate(&self) -> Result<(), TaxonomyError> {
        // Colour-marking DFS over the broader -> narrower direction.
        let n = self.len();
        let mut state = vec![0u8; n];
        fn visit(
            t: &Taxonomy,
            v: usize,
            state: &mut [u8],
        ) -> Result<(), TaxonomyError> {
            state[v] = 1;
            for &(narrower, broader) in &t.subsumptions {
                if broader.index() != v || narrower == broader {
                    continue;
                }
                match state[narrower.index()] {
                    1 => return Err(TaxonomyError::Cycle(t.name(narrower).to_string())),
                    0 => visit(t, narrower.index(), state)?,
                    _ => {}
                }
            }
            state[v] = 2;
            Ok(())
        }
        for v in 0..n {
            if state[v] == 0 {
                visit(self, v, &mut state)?;
            }
        }
        for &(narrower, broader) in &self.subsumptions {
            let (pn, pb) = (self.priority(narrower), self.priority(broader));
            if pn > pb {
                return Err(TaxonomyError::PriorityViolation {
                    narrower: self.name(narrower).to_string(),
                    broader: self.name(broader).to_string(),
                    narrower_priority: pn,
                    broader_priority: pb,
                });
            }
        }
        Ok(())
    }

    /// Everything a taxi declaring `set` can offer: the least superset closed
    /// under "if `y` is present and `x ⊑ y`, add `x`".
    pub fn closure(&self, set: CharSet) -> Result<CharSet, TaxonomyError> {
        if let Some(stray) = set.iter().find(|id| id.index() >= self.len()) {
            return Err(TaxonomyError::UnknownCharacteristic(format!(
                "#{}",
                stray.index()
            )));
        }
        let mut closed = set;
        loop {
            let before = closed;
            for &(narrower, broader) in &self.subsumptions {
                if closed.contains(broader) {
                    closed = closed.with(narrower);
                }
            }
            if closed == before {
                return Ok(closed);
            }
        }
    }

    /// Whether a taxi declaring `offered` satisfies every requirement.
    pub fn compatible(&self, offered: CharSet, requirements: CharSet) -> bool {
        match self.closure(offered) {
            Ok(closed) => requirements.is_subset(closed),
            Err(_) => false,
        }
    }

    /// Total order on requirement sets by "complexity".
    ///
    /// Each set is viewed as its members sorted from highest to lowest
    /// priority (equal priorities: alphabetically first name ranks higher);
    /// the sequences are compared element by element and a strict prefix is
    /// the smaller one. `Greater` means `a` is processed before `b`.
    pub fn compare_requirements(&self, a: CharSet, b: CharSet) -> Ordering {
        let ka = self.rank_sequence(a);
        let kb = self.rank_sequence(b);
        for (x, y) in ka.iter().zip(&kb) {
            let o = self.compare_members(*x, *y);
            if o != Ordering::Equal {
                return o;
            }
        }
        ka.len().cmp(&kb.len())
    }

    fn compare_members(&self, x: CharId, y: CharId) -> Ordering {
        self.priority(x)
            .total_cmp(&self.priority(y))
            .then_with(|| self.name(y).cmp(self.name(x)))
    }

    fn rank_sequence(&self, set: CharSet) -> Vec<CharId> {
        let mut v: Vec<CharId> = set.iter().filter(|id| id.index() < self.len()).collect();
        v.sort_by(|x, y| self.compare_members(*y, *x));
        v
    }

    /// Sorts requirement sets from most to least complex, dropping duplicates.
    pub fn order_requirement_sets(&self, sets: impl IntoIterator<Item = CharSet>) -> Vec<CharSet> {
        let mut v: Vec<CharSet> = sets.into_iter().collect();
        v.sort_by(|a, b| self.compare_requirements(*b, *a));
        v.dedup();
        v
    }
}

impl fmt::Display for Taxonomy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self
            .characteristics()
            .map(|(_, n, p)| format!("{n}:{p}"))
            .collect();
        write!(f, "Ch={{{}}}", names.join(", "))?;
        let edges: Vec<String> = self.subsumptions().map(|(n, b)| format!("{n}⊑{b}")).collect();
        write!(f, " ⊑={{{}}}", edges.join(", "))
    }
}
