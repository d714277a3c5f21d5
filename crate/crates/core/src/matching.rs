//! Rectangular min-cost bipartite assignment with forbidden pairs.
//!
//! [`solve_assignment`] returns a maximum-cardinality matching over the
//! allowed pairs and, among those, one of minimum total cost. Ties between
//! optimal matchings resolve to the lexicographically smallest sorted pair
//! list, so the output is a deterministic function of the matrix.
//!
//! The solver is a shortest-augmenting-path Hungarian method. Each row gets a
//! private "unmatched" column with cost `(1, 0)` in a lexicographic
//! `(misses, distance)` cost space, which makes cardinality strictly dominate
//! distance without a big-M constant. After solving, the dual potentials
//! identify the tight subgraph that contains every optimal matching, and a
//! greedy pass over rows walks to the lexicographically smallest one.
//!
//! [`brute_force_assignment`] enumerates all matchings of small matrices and
//! serves as a test oracle.

use std::cmp::Ordering;
use std::collections::VecDeque;
use std::ops::{Add, Sub};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatchingError {
    #[error("cost at ({row}, {col}) must be finite and non-negative, got {value}")]
    InvalidCost { row: usize, col: usize, value: f64 },
    #[error("brute force limited to {limit}x{limit}, got {rows}x{cols}")]
    SizeLimitExceeded { rows: usize, cols: usize, limit: usize },
}

/// Largest side accepted by [`brute_force_assignment`].
pub const BRUTE_FORCE_LIMIT: usize = 8;

/// One cell of a [`CostMatrix`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Entry {
    Cost(f64),
    Forbidden,
}

/// Dense `rows x cols` matrix of non-negative costs, where a cell may be
/// marked forbidden (the pair may not be matched at all).
#[derive(Clone, Debug, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    /// Row-major; `f64::INFINITY` marks a forbidden cell and never takes
    /// part in cost arithmetic.
    data: Vec<f64>,
}

impl CostMatrix {
    /// A matrix with every pair forbidden.
    pub fn forbidden(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![f64::INFINITY; rows * cols],
        }
    }

    /// Builds from nested rows; `None` is a forbidden pair.
    pub fn from_rows(rows: &[Vec<Option<f64>>]) -> Result<Self, MatchingError> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        let mut out = Self::forbidden(n, m);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), m, "ragged cost matrix");
            for (c, cell) in row.iter().enumerate() {
                if let Some(v) = cell {
                    out.set(r, c, *v)?;
                }
            }
        }
        Ok(out)
    }

    /// Builds from a fully allowed dense matrix.
    pub fn from_costs(rows: &[Vec<f64>]) -> Result<Self, MatchingError> {
        let nested: Vec<Vec<Option<f64>>> = rows
            .iter()
            .map(|r| r.iter().copied().map(Some).collect())
            .collect();
        Self::from_rows(&nested)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn set(&mut self, row: usize, col: usize, cost: f64) -> Result<(), MatchingError> {
        if !cost.is_finite() || cost < 0.0 {
            return Err(MatchingError::InvalidCost { row, col, value: cost });
        }
        self.data[row * self.cols + col] = cost;
        Ok(())
    }

    pub fn forbid(&mut self, row: usize, col: usize) {
        self.data[row * self.cols + col] = f64::INFINITY;
    }

    pub fn entry(&self, row: usize, col: usize) -> Entry {
        let v = self.data[row * self.cols + col];
        if v.is_finite() {
            Entry::Cost(v)
        } else {
            Entry::Forbidden
        }
    }

    pub fn cost(&self, row: usize, col: usize) -> Option<f64> {
        match self.entry(row, col) {
            Entry::Cost(v) => Some(v),
            Entry::Forbidden => None,
        }
    }

    #[inline]
    fn raw_row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    fn max_cost(&self) -> f64 {
        self.data
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(0.0, f64::max)
    }

    /// Matrix with rows reordered by `row_perm` and columns by `col_perm`:
    /// new cell `(i, j)` is old cell `(row_perm[i], col_perm[j])`.
    pub fn permuted(&self, row_perm: &[usize], col_perm: &[usize]) -> Self {
        let mut out = Self::forbidden(self.rows, self.cols);
        for (i, &ri) in row_perm.iter().enumerate() {
            for (j, &cj) in col_perm.iter().enumerate() {
                out.data[i * self.cols + j] = self.data[ri * self.cols + cj];
            }
        }
        out
    }
}

/// A matching as `(row, col)` pairs sorted by row, with its total cost.
#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

impl Assignment {
    fn from_pairs(m: &CostMatrix, mut pairs: Vec<(usize, usize)>) -> Self {
        pairs.sort_unstable();
        let total = pairs
            .iter()
            .map(|&(r, c)| m.cost(r, c).expect("matched pair is allowed"))
            .sum();
        Self { pairs, total }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Column matched to `row`, if any.
    pub fn col_of(&self, row: usize) -> Option<usize> {
        self.pairs
            .binary_search_by(|&(r, _)| r.cmp(&row))
            .ok()
            .map(|i| self.pairs[i].1)
    }
}

fn tolerance(m: &CostMatrix) -> f64 {
    1e-9 * (1.0 + m.max_cost())
}

/// Lexicographic cost: unmatched rows first, then distance.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Lex {
    miss: i64,
    dist: f64,
}

impl Lex {
    const ZERO: Lex = Lex { miss: 0, dist: 0.0 };
    const INF: Lex = Lex {
        miss: i64::MAX / 2,
        dist: 0.0,
    };

    #[inline]
    fn is_inf(self) -> bool {
        self.miss >= i64::MAX / 4
    }

    #[inline]
    fn lt(self, other: Lex) -> bool {
        self.miss < other.miss || (self.miss == other.miss && self.dist < other.dist)
    }
}

impl Add for Lex {
    type Output = Lex;
    #[inline]
    fn add(self, o: Lex) -> Lex {
        Lex {
            miss: self.miss + o.miss,
            dist: self.dist + o.dist,
        }
    }
}

impl Sub for Lex {
    type Output = Lex;
    #[inline]
    fn sub(self, o: Lex) -> Lex {
        Lex {
            miss: self.miss - o.miss,
            dist: self.dist - o.dist,
        }
    }
}

/// Optimal primal/dual state of the augmented problem. Columns `0..cols`
/// are real, column `cols + r` is the private dummy of row `r`.
struct Solved {
    row_col: Vec<usize>,
    u: Vec<Lex>,
    v: Vec<Lex>,
}

fn shortest_augmenting_paths(m: &CostMatrix) -> Solved {
    let n = m.rows;
    let real = m.cols;
    let total = real + n;
    // 1-based internally; index 0 is the virtual root of each search.
    let mut u = vec![Lex::ZERO; n + 1];
    let mut v = vec![Lex::ZERO; total + 1];
    let mut p = vec![0usize; total + 1];
    let mut way = vec![0usize; total + 1];
    let mut minv = vec![Lex::INF; total + 1];
    let mut used = vec![false; total + 1];
    let unmatched = Lex { miss: 1, dist: 0.0 };

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        minv.fill(Lex::INF);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let ui0 = u[i0];
            let mut delta = Lex::INF;
            let mut j1 = 0usize;
            let row = m.raw_row(i0 - 1);
            for j in 1..=real {
                if used[j] {
                    continue;
                }
                let c = row[j - 1];
                if c.is_finite() {
                    let cur = Lex { miss: 0, dist: c } - ui0 - v[j];
                    if cur.lt(minv[j]) {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                }
                if minv[j].lt(delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            let own = real + i0;
            if !used[own] {
                let cur = unmatched - ui0 - v[own];
                if cur.lt(minv[own]) {
                    minv[own] = cur;
                    way[own] = j0;
                }
            }
            for j in real + 1..=total {
                if !used[j] && minv[j].lt(delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            debug_assert!(!delta.is_inf(), "own dummy column is always reachable");
            for j in 0..=total {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else if !minv[j].is_inf() {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_col = vec![usize::MAX; n];
    for j in 1..=total {
        if p[j] != 0 {
            row_col[p[j] - 1] = j - 1;
        }
    }
    Solved {
        row_col,
        u: u[1..].to_vec(),
        v: v[1..].to_vec(),
    }
}

/// Walks the tight subgraph from the solver's optimum to the
/// lexicographically smallest optimal matching.
///
/// Optimal matchings are exactly the row-perfect matchings on tight edges
/// that cover every column with a negative potential. Rows are fixed in
/// order, each to the smallest tight column for which such a matching still
/// exists given the rows already fixed.
struct Canonicalizer<'a> {
    adj: Vec<Vec<usize>>,
    rev: Vec<Vec<usize>>,
    must_cover: Vec<bool>,
    row_col: &'a mut Vec<usize>,
    col_row: Vec<Option<usize>>,
    fixed_row: Vec<bool>,
    locked_col: Vec<bool>,
}

impl<'a> Canonicalizer<'a> {
    fn new(m: &CostMatrix, solved: &'a mut Solved) -> Self {
        let n = m.rows;
        let real = m.cols;
        let total = real + n;
        let tol = tolerance(m);
        let mut adj = vec![Vec::new(); n];
        let mut rev = vec![Vec::new(); total];
        for (r, edges) in adj.iter_mut().enumerate() {
            let ur = solved.u[r];
            let row = m.raw_row(r);
            let current = solved.row_col[r];
            for (c, &cost) in row.iter().enumerate() {
                if !cost.is_finite() {
                    continue;
                }
                let red = Lex { miss: 0, dist: cost } - ur - solved.v[c];
                if c == current || (red.miss == 0 && red.dist.abs() <= tol) {
                    edges.push(c);
                }
            }
            let own = real + r;
            let red = Lex { miss: 1, dist: 0.0 } - ur - solved.v[own];
            if own == current || (red.miss == 0 && red.dist.abs() <= tol) {
                edges.push(own);
            }
            for &c in edges.iter() {
                rev[c].push(r);
            }
        }
        let must_cover = solved
            .v
            .iter()
            .map(|v| v.miss < 0 || (v.miss == 0 && v.dist < -tol))
            .collect();
        let mut col_row = vec![None; total];
        for (r, &c) in solved.row_col.iter().enumerate() {
            col_row[c] = Some(r);
        }
        Self {
            adj,
            rev,
            must_cover,
            row_col: &mut solved.row_col,
            col_row,
            fixed_row: vec![false; n],
            locked_col: vec![false; total],
        }
    }

    fn run(mut self) {
        for r in 0..self.row_col.len() {
            let candidates = self.adj[r].clone();
            for c in candidates {
                if self.locked_col[c] {
                    continue;
                }
                if c == self.row_col[r] || self.try_force(r, c) {
                    break;
                }
            }
            self.fixed_row[r] = true;
            let c = self.row_col[r];
            self.locked_col[c] = true;
        }
    }

    /// Tries to move row `r` onto column `c` while keeping the matching
    /// optimal and every fixed row in place. Commits on success.
    fn try_force(&mut self, r: usize, c: usize) -> bool {
        let mut rc = self.row_col.clone();
        let mut cr = self.col_row.clone();
        let old = rc[r];
        let holder = cr[c];
        cr[old] = None;
        rc[r] = c;
        cr[c] = Some(r);

        if let Some(h) = holder {
            // Re-seat the displaced row along an alternating path that ends
            // in a free column.
            let total = cr.len();
            let mut via_row = vec![usize::MAX; total];
            let mut seen_col = vec![false; total];
            let mut seen_row = vec![false; rc.len()];
            let mut queue = VecDeque::from([h]);
            seen_row[h] = true;
            let mut end = None;
            'bfs: while let Some(x) = queue.pop_front() {
                for &y in &self.adj[x] {
                    if seen_col[y] || self.locked_col[y] {
                        continue;
                    }
                    seen_col[y] = true;
                    via_row[y] = x;
                    match cr[y] {
                        None => {
                            end = Some(y);
                            break 'bfs;
                        }
                        Some(z) if z != r && !self.fixed_row[z] && !seen_row[z] => {
                            seen_row[z] = true;
                            queue.push_back(z);
                        }
                        Some(_) => {}
                    }
                }
            }
            let Some(mut y) = end else {
                return false;
            };
            loop {
                let x = via_row[y];
                let prev = if x == h { None } else { Some(rc[x]) };
                rc[x] = y;
                cr[y] = Some(x);
                match prev {
                    Some(p) => y = p,
                    None => break,
                }
            }
        }

        if cr[old].is_none() && self.must_cover[old] {
            // A column with negative potential must stay matched: pull a row
            // onto it and push the vacancy along until it lands on a column
            // that may stay free.
            let total = cr.len();
            let mut target = vec![usize::MAX; rc.len()];
            let mut held_by = vec![usize::MAX; total];
            let mut seen_col = vec![false; total];
            let mut seen_row = vec![false; rc.len()];
            let mut queue = VecDeque::from([old]);
            seen_col[old] = true;
            let mut end = None;
            'bfs2: while let Some(col) = queue.pop_front() {
                for &x in &self.rev[col] {
                    if x == r || self.fixed_row[x] || seen_row[x] {
                        continue;
                    }
                    seen_row[x] = true;
                    target[x] = col;
                    let y = rc[x];
                    if !self.must_cover[y] {
                        end = Some(x);
                        break 'bfs2;
                    }
                    if !seen_col[y] {
                        seen_col[y] = true;
                        held_by[y] = x;
                        queue.push_back(y);
                    }
                }
            }
            let Some(mut x) = end else {
                return false;
            };
            cr[rc[x]] = None;
            loop {
                let col = target[x];
                rc[x] = col;
                cr[col] = Some(x);
                if col == old {
                    break;
                }
                x = held_by[col];
            }
        }

        *self.row_col = rc;
        self.col_row = cr;
        true
    }
}

/// Solves the rectangular assignment problem.
///
/// Maximises the number of matched pairs, then minimises the total cost,
/// then picks the lexicographically smallest sorted pair list.
pub fn solve_assignment(m: &CostMatrix) -> Assignment {
    if m.rows == 0 || m.cols == 0 {
        return Assignment {
            pairs: Vec::new(),
            total: 0.0,
        };
    }
    let mut solved = shortest_augmenting_paths(m);
    Canonicalizer::new(m, &mut solved).run();
    let pairs = solved
        .row_col
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c < m.cols)
        .map(|(r, &c)| (r, c))
        .collect();
    Assignment::from_pairs(m, pairs)
}

/// Exhaustive oracle with the same objective and tie-break as
/// [`solve_assignment`].
pub fn brute_force_assignment(m: &CostMatrix) -> Result<Assignment, MatchingError> {
    if m.rows.max(m.cols) > BRUTE_FORCE_LIMIT {
        return Err(MatchingError::SizeLimitExceeded {
            rows: m.rows,
            cols: m.cols,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    struct Search<'a> {
        m: &'a CostMatrix,
        tol: f64,
        used: Vec<bool>,
        current: Vec<(usize, usize)>,
        best: Option<Assignment>,
    }
    impl Search<'_> {
        fn offer(&mut self) {
            let candidate = Assignment::from_pairs(self.m, self.current.clone());
            let better = match &self.best {
                None => true,
                Some(b) => match candidate.len().cmp(&b.len()) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => {
                        if candidate.total < b.total - self.tol {
                            true
                        } else if candidate.total > b.total + self.tol {
                            false
                        } else {
                            candidate.pairs < b.pairs
                        }
                    }
                },
            };
            if better {
                self.best = Some(candidate);
            }
        }

        fn go(&mut self, row: usize) {
            if row == self.m.rows {
                self.offer();
                return;
            }
            for c in 0..self.m.cols {
                if self.used[c] || self.m.cost(row, c).is_none() {
                    continue;
                }
                self.used[c] = true;
                self.current.push((row, c));
                self.go(row + 1);
                self.current.pop();
                self.used[c] = false;
            }
            self.go(row + 1);
        }
    }
    let mut s = Search {
        m,
        tol: tolerance(m),
        used: vec![false; m.cols],
        current: Vec::new(),
        best: None,
    };
    s.go(0);
    Ok(s.best.unwrap_or(Assignment {
        pairs: Vec::new(),
        total: 0.0,
    }))
}
