//! Social-connectedness edge lists: streaming ingest of scaled SCI files,
//! scaling of raw friendship counts, and symmetry checks.

mod raw;
mod stream;

pub use raw::{
    compute_sci_from_raw, read_raw_connectivity, read_user_counts, RawConnectivityRecord,
    UserCount, SCI_SCALE,
};
pub use stream::{stream_edges, stream_edges_chunked, ZoneFilter, SCI_HEADER};

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;
use std::io::{self, Write};
use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

/// One directed listing of a zone pair with its scaled connectedness.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct EdgeRecord {
    pub loc_a: String,
    pub loc_b: String,
    pub weight: u64,
}

impl EdgeRecord {
    pub fn new(loc_a: impl Into<String>, loc_b: impl Into<String>, weight: u64) -> Self {
        EdgeRecord {
            loc_a: loc_a.into(),
            loc_b: loc_b.into(),
            weight,
        }
    }

    pub fn is_self_pair(&self) -> bool {
        self.loc_a == self.loc_b
    }
}

/// An unordered edge between interned zones, `a <= b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub a: u32,
    pub b: u32,
    pub weight: u64,
}

impl Edge {
    pub fn is_self_pair(&self) -> bool {
        self.a == self.b
    }
}

/// Symmetric weighted edge list: each unordered pair at most once, sorted by
/// (a, b). Zone ids are interned in `ids`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EdgeList {
    ids: Vec<String>,
    edges: Vec<Edge>,
}

impl EdgeList {
    /// Builds a list from pre-collapsed parts. `edges` must be sorted,
    /// unique per pair and reference valid ids.
    pub(crate) fn from_parts(ids: Vec<String>, edges: Vec<Edge>) -> Self {
        debug_assert!(edges
            .windows(2)
            .all(|w| (w[0].a, w[0].b) < (w[1].a, w[1].b)));
        debug_assert!(edges
            .iter()
            .all(|e| e.a <= e.b && (e.b as usize) < ids.len()));
        EdgeList { ids, edges }
    }

    /// Collapses directed records into an edge list, or returns the
    /// symmetry report if any violation was found.
    pub fn from_records(records: &[EdgeRecord]) -> Result<Self, SymmetryReport> {
        let (list, violations) = collapse_records(records);
        if violations.is_empty() {
            Ok(list)
        } else {
            Err(SymmetryReport {
                violations,
                collapsed: list.records().collect(),
            })
        }
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn id(&self, index: u32) -> &str {
        &self.ids[index as usize]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = EdgeRecord> + '_ {
        self.edges
            .iter()
            .map(|e| EdgeRecord::new(self.id(e.a), self.id(e.b), e.weight))
    }

    /// Weight of the unordered pair, if present.
    pub fn weight(&self, a: &str, b: &str) -> Option<u64> {
        let ia = self.ids.iter().position(|x| x == a)? as u32;
        let ib = self.ids.iter().position(|x| x == b)? as u32;
        let (lo, hi) = (ia.min(ib), ia.max(ib));
        self.edges
            .binary_search_by(|e| (e.a, e.b).cmp(&(lo, hi)))
            .ok()
            .map(|i| self.edges[i].weight)
    }

    /// Writes the list in the scaled SCI format, one row per unordered pair.
    pub fn write_tsv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{SCI_HEADER}")?;
        for e in &self.edges {
            writeln!(w, "{}\t{}\t{}", self.id(e.a), self.id(e.b), e.weight)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct IngestStats {
    pub rows_read: u64,
    pub rows_kept: u64,
    pub rows_dropped_unknown_zone: u64,
    pub self_pairs: u64,
}

impl IngestStats {
    pub(crate) fn merge(&mut self, other: &IngestStats) {
        self.rows_read += other.rows_read;
        self.rows_kept += other.rows_kept;
        self.rows_dropped_unknown_zone += other.rows_dropped_unknown_zone;
        self.self_pairs += other.self_pairs;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymmetryViolation {
    /// Both orders listed with different weights.
    WeightMismatch {
        loc_a: String,
        loc_b: String,
        forward: u64,
        backward: u64,
    },
    /// The same unordered pair listed more than once per order.
    DuplicatePair {
        loc_a: String,
        loc_b: String,
        occurrences: usize,
    },
}

impl fmt::Display for SymmetryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SymmetryViolation::WeightMismatch {
                loc_a,
                loc_b,
                forward,
                backward,
            } => write!(
                f,
                "asymmetric weights for {loc_a}–{loc_b}: {forward} vs {backward}"
            ),
            SymmetryViolation::DuplicatePair {
                loc_a,
                loc_b,
                occurrences,
            } => write!(f, "pair {loc_a}–{loc_b} listed {occurrences} times"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct SymmetryReport {
    pub violations: Vec<SymmetryViolation>,
    /// One record per unordered pair that passed the check.
    pub collapsed: Vec<EdgeRecord>,
}

impl SymmetryReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Accepts single-order and consistent double-order listings; flags weight
/// mismatches between orders and repeated listings.
pub fn check_symmetry(records: &[EdgeRecord]) -> SymmetryReport {
    let (list, violations) = collapse_records(records);
    SymmetryReport {
        violations,
        collapsed: list.records().collect(),
    }
}

fn collapse_records(records: &[EdgeRecord]) -> (EdgeList, Vec<SymmetryViolation>) {
    let mut ids: Vec<String> = records
        .iter()
        .flat_map(|r| [r.loc_a.clone(), r.loc_b.clone()])
        .collect();
    ids.sort();
    ids.dedup();
    let index: HashMap<&str, u32> = ids
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i as u32))
        .collect();
    let mut rows: Vec<Row> = records
        .iter()
        .map(|r| Row::new(index[r.loc_a.as_str()], index[r.loc_b.as_str()], r.weight))
        .collect();
    rows.sort_unstable();
    let mut edges = Vec::new();
    let mut issues = Vec::new();
    collapse_sorted(rows.into_iter(), &mut edges, &mut issues, false);
    let violations = issues.iter().map(|i| i.describe(&ids)).collect();
    (EdgeList::from_parts(ids, edges), violations)
}

/// A directed row normalized to (lo, hi) with its original orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) struct Row {
    lo: u32,
    hi: u32,
    reversed: bool,
    weight: u64,
}

impl Row {
    pub(crate) fn new(a: u32, b: u32, weight: u64) -> Self {
        Row {
            lo: a.min(b),
            hi: a.max(b),
            reversed: a > b,
            weight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum PairIssue {
    Mismatch {
        lo: u32,
        hi: u32,
        forward: u64,
        backward: u64,
    },
    Duplicate {
        lo: u32,
        hi: u32,
        count: usize,
    },
}

impl PairIssue {
    pub(crate) fn pair(&self) -> (u32, u32) {
        match *self {
            PairIssue::Mismatch { lo, hi, .. } | PairIssue::Duplicate { lo, hi, .. } => (lo, hi),
        }
    }

    pub(crate) fn describe(&self, ids: &[String]) -> SymmetryViolation {
        match *self {
            PairIssue::Mismatch {
                lo,
                hi,
                forward,
                backward,
            } => SymmetryViolation::WeightMismatch {
                loc_a: ids[lo as usize].clone(),
                loc_b: ids[hi as usize].clone(),
                forward,
                backward,
            },
            PairIssue::Duplicate { lo, hi, count } => SymmetryViolation::DuplicatePair {
                loc_a: ids[lo as usize].clone(),
                loc_b: ids[hi as usize].clone(),
                occurrences: count,
            },
        }
    }
}

/// Collapses rows sorted by (lo, hi, reversed, weight) into edges.
pub(crate) fn collapse_sorted(
    rows: impl Iterator<Item = Row>,
    edges: &mut Vec<Edge>,
    issues: &mut Vec<PairIssue>,
    stop_at_first: bool,
) {
    let mut group: Vec<Row> = Vec::with_capacity(4);
    let flush = |group: &mut Vec<Row>, edges: &mut Vec<Edge>, issues: &mut Vec<PairIssue>| {
        let first = group[0];
        let (lo, hi) = (first.lo, first.hi);
        match group[..] {
            [r] => edges.push(Edge {
                a: lo,
                b: hi,
                weight: r.weight,
            }),
            [f, b] if lo != hi && !f.reversed && b.reversed => {
                if f.weight == b.weight {
                    edges.push(Edge {
                        a: lo,
                        b: hi,
                        weight: f.weight,
                    });
                } else {
                    issues.push(PairIssue::Mismatch {
                        lo,
                        hi,
                        forward: f.weight,
                        backward: b.weight,
                    });
                }
            }
            _ => issues.push(PairIssue::Duplicate {
                lo,
                hi,
                count: group.len(),
            }),
        }
        group.clear();
    };
    for row in rows {
        if let Some(last) = group.last() {
            if (last.lo, last.hi) != (row.lo, row.hi) {
                flush(&mut group, edges, issues);
                if stop_at_first && !issues.is_empty() {
                    return;
                }
            }
        }
        group.push(row);
    }
    if !group.is_empty() {
        flush(&mut group, edges, issues);
    }
}

/// K-way merge of individually sorted row runs.
pub(crate) fn merge_sorted_runs(runs: Vec<Vec<Row>>) -> impl Iterator<Item = Row> {
    struct Merge {
        runs: Vec<std::vec::IntoIter<Row>>,
        heap: BinaryHeap<Reverse<(Row, usize)>>,
    }
    impl Iterator for Merge {
        type Item = Row;
        fn next(&mut self) -> Option<Row> {
            let Reverse((row, i)) = self.heap.pop()?;
            if let Some(n) = self.runs[i].next() {
                self.heap.push(Reverse((n, i)));
            }
            Some(row)
        }
    }
    let mut runs: Vec<_> = runs.into_iter().map(Vec::into_iter).collect();
    let mut heap = BinaryHeap::with_capacity(runs.len());
    for (i, r) in runs.iter_mut().enumerate() {
        if let Some(row) = r.next() {
            heap.push(Reverse((row, i)));
        }
    }
    Merge { runs, heap }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: line 1: expected header {expected:?}, found {found:?}")]
    Header {
        path: PathBuf,
        expected: String,
        found: String,
    },
    #[error("{path}: line {line}: {message}")]
    Malformed {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{path}: line {line}: weight must be positive, got {value:?}")]
    NonPositiveWeight {
        path: PathBuf,
        line: u64,
        value: String,
    },
    #[error("{path}: {violation} (lines {lines:?})")]
    Symmetry {
        path: PathBuf,
        violation: SymmetryViolation,
        lines: Vec<u64>,
    },
    #[error("no user count for zone {zone_id:?}")]
    MissingUserCount { zone_id: String },
    #[error("duplicate user count for zone {zone_id:?}")]
    DuplicateUserCount { zone_id: String },
    #[error("user count for zone {zone_id:?} must be positive")]
    ZeroUsers { zone_id: String },
    #[error("every friend count is zero; the scaling maximum is undefined")]
    AllZeroFriendCounts,
    #[error("raw connectivity: {0}")]
    RawSymmetry(SymmetryViolation),
    #[error("integer overflow while scaling connectedness for {loc_a}–{loc_b}")]
    Overflow { loc_a: String, loc_b: String },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consistent_double_order_collapses() {
        let rep = check_symmetry(&[EdgeRecord::new("A", "B", 5), EdgeRecord::new("B", "A", 5)]);
        assert!(rep.is_ok());
        assert_eq!(rep.collapsed, vec![EdgeRecord::new("A", "B", 5)]);
    }

    #[test]
    fn mismatched_double_order_flagged() {
        let rep = check_symmetry(&[EdgeRecord::new("A", "B", 5), EdgeRecord::new("B", "A", 7)]);
        assert_eq!(
            rep.violations,
            vec![SymmetryViolation::WeightMismatch {
                loc_a: "A".into(),
                loc_b: "B".into(),
                forward: 5,
                backward: 7
            }]
        );
    }

    #[test]
    fn single_order_accepted() {
        let rep = check_symmetry(&[EdgeRecord::new("A", "B", 5)]);
        assert!(rep.is_ok());
        assert_eq!(rep.collapsed.len(), 1);
    }

    #[test]
    fn same_order_repeat_is_duplicate() {
        let rep = check_symmetry(&[
            EdgeRecord::new("A", "B", 5),
            EdgeRecord::new("A", "B", 5),
            EdgeRecord::new("C", "C", 2),
            EdgeRecord::new("C", "C", 2),
        ]);
        assert_eq!(rep.violations.len(), 2);
        assert!(rep
            .violations
            .iter()
            .all(|v| matches!(v, SymmetryViolation::DuplicatePair { occurrences: 2, .. })));
    }

    #[test]
    fn self_pair_kept_once() {
        let list = EdgeList::from_records(&[EdgeRecord::new("A", "A", 9)]).unwrap();
        assert!(list.edges()[0].is_self_pair());
        assert_eq!(list.weight("A", "A"), Some(9));
    }

    #[test]
    fn merge_of_runs_is_sorted() {
        let runs = vec![
            vec![Row::new(0, 1, 1), Row::new(2, 3, 1)],
            vec![Row::new(1, 0, 1), Row::new(0, 2, 4)],
            vec![],
        ];
        let merged: Vec<Row> = merge_sorted_runs(runs).collect();
        assert!(merged.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(merged.len(), 4);
    }
}
