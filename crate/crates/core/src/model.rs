//! Crossmaps, shared mass arrays, and draft validation.
//!
//! A [`Crossmap`] can only be obtained through [`build_crossmap`] (or the
//! operations layered on it), so holding one is proof that every source has
//! at least one outgoing edge, that outgoing weights sum to exactly one, and
//! that no `(from, to)` pair repeats.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use crate::key::Key;
use crate::rational::Rational;

/// One weighted link from a source key to a target key.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Edge {
    pub from: Key,
    pub to: Key,
    pub weight: Rational,
}

impl Edge {
    pub fn new(from: Key, to: Key, weight: Rational) -> Self {
        Edge { from, to, weight }
    }

    /// Weight strictly below one, i.e. part of a split.
    pub fn is_fractional(&self) -> bool {
        !self.weight.is_one()
    }
}

/// Unvalidated edge list, the staging form before [`build_crossmap`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeListDraft {
    pub edges: Vec<Edge>,
    pub provenance_note: Option<String>,
}

impl EdgeListDraft {
    pub fn new(edges: Vec<Edge>) -> Self {
        EdgeListDraft {
            edges,
            provenance_note: None,
        }
    }
}

impl FromIterator<Edge> for EdgeListDraft {
    fn from_iter<I: IntoIterator<Item = Edge>>(iter: I) -> Self {
        EdgeListDraft::new(iter.into_iter().collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingCode {
    WeightSumNotOne,
    DuplicateEdge,
    WeightOutOfRange,
    EmptyEdgeList,
    SplitSource,
    ImputedEqualSplit,
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            FindingCode::WeightSumNotOne => "weight_sum_not_one",
            FindingCode::DuplicateEdge => "duplicate_edge",
            FindingCode::WeightOutOfRange => "weight_out_of_range",
            FindingCode::EmptyEdgeList => "empty_edge_list",
            FindingCode::SplitSource => "split_source",
            FindingCode::ImputedEqualSplit => "imputed_equal_split",
        };
        f.write_str(name)
    }
}

/// What a finding is about.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Subject {
    Key { key: Key },
    Edge { from: Key, to: Key },
    Crossmap,
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Key { key } => write!(f, "{key}"),
            Subject::Edge { from, to } => write!(f, "({from}, {to})"),
            Subject::Crossmap => f.write_str("-"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: FindingCode,
    pub subject: Subject,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sum: Option<Rational>,
}

/// Outcome of a structural check. `ok` is true iff no finding is an error.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn from_findings(findings: Vec<Finding>) -> Self {
        let ok = findings.iter().all(|f| f.severity != Severity::Error);
        ValidationReport { ok, findings }
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Error)
    }

    /// Finding about a specific key with the given code, if any.
    pub fn find(&self, code: FindingCode, key: &str) -> Option<&Finding> {
        self.findings.iter().find(|f| {
            f.code == code && matches!(&f.subject, Subject::Key { key: k } if k.as_str() == key)
        })
    }
}

/// A validated, mass-preserving weighted mapping between two key sets.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Crossmap {
    sources: Vec<Key>,
    targets: Vec<Key>,
    edges: Vec<Edge>,
}

impl Crossmap {
    /// Source keys in canonical (byte-lexicographic) order.
    pub fn sources(&self) -> &[Key] {
        &self.sources
    }

    /// Target keys in canonical order.
    pub fn targets(&self) -> &[Key] {
        &self.targets
    }

    /// Edges sorted by `(from, to)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn has_source(&self, key: &str) -> bool {
        self.sources
            .binary_search_by(|k| k.as_str().cmp(key))
            .is_ok()
    }

    pub fn has_target(&self, key: &str) -> bool {
        self.targets
            .binary_search_by(|k| k.as_str().cmp(key))
            .is_ok()
    }

    /// Outgoing edges of `source`; empty when the key is not a source.
    pub fn outgoing(&self, source: &str) -> &[Edge] {
        let start = self.edges.partition_point(|e| e.from.as_str() < source);
        let end = self.edges.partition_point(|e| e.from.as_str() <= source);
        &self.edges[start..end]
    }

    /// Sources with more than one outgoing edge.
    pub fn split_sources(&self) -> impl Iterator<Item = &Key> {
        self.sources
            .iter()
            .filter(|s| self.outgoing(s.as_str()).len() > 1)
    }

    pub fn to_draft(&self) -> EdgeListDraft {
        EdgeListDraft::new(self.edges.clone())
    }

    /// Assemble from edges that are already known to satisfy every invariant.
    pub(crate) fn from_valid_edges(mut edges: Vec<Edge>) -> Self {
        edges.sort();
        let sources: BTreeSet<Key> = edges.iter().map(|e| e.from.clone()).collect();
        let targets: BTreeSet<Key> = edges.iter().map(|e| e.to.clone()).collect();
        let map = Crossmap {
            sources: sources.into_iter().collect(),
            targets: targets.into_iter().collect(),
            edges,
        };
        debug_assert!(validate_edges(&map.edges).ok);
        map
    }
}

/// Full structural validation of an edge list: weight range, duplicate pairs,
/// and the per-source mass-preserving condition.
pub(crate) fn validate_edges(edges: &[Edge]) -> ValidationReport {
    let mut findings = Vec::new();
    if edges.is_empty() {
        findings.push(Finding {
            severity: Severity::Error,
            code: FindingCode::EmptyEdgeList,
            subject: Subject::Crossmap,
            message: "edge list has no edges".into(),
            sum: None,
        });
    }

    let mut sorted: Vec<&Edge> = edges.iter().collect();
    sorted.sort();

    for edge in &sorted {
        if !edge.weight.is_unit_weight() {
            findings.push(Finding {
                severity: Severity::Error,
                code: FindingCode::WeightOutOfRange,
                subject: Subject::Edge {
                    from: edge.from.clone(),
                    to: edge.to.clone(),
                },
                message: format!("weight {} is outside (0, 1]", edge.weight),
                sum: None,
            });
        }
    }

    let mut last_duplicate: Option<(&Key, &Key)> = None;
    for pair in sorted.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.from == b.from && a.to == b.to && last_duplicate != Some((&a.from, &a.to)) {
            last_duplicate = Some((&a.from, &a.to));
            findings.push(Finding {
                severity: Severity::Error,
                code: FindingCode::DuplicateEdge,
                subject: Subject::Edge {
                    from: a.from.clone(),
                    to: a.to.clone(),
                },
                message: format!("duplicate edge ({}, {})", a.from, a.to),
                sum: None,
            });
        }
    }

    let mut sums: BTreeMap<&Key, Rational> = BTreeMap::new();
    for edge in &sorted {
        *sums.entry(&edge.from).or_default() += &edge.weight;
    }
    for (source, sum) in sums {
        if !sum.is_one() {
            findings.push(Finding {
                severity: Severity::Error,
                code: FindingCode::WeightSumNotOne,
                subject: Subject::Key {
                    key: source.clone(),
                },
                message: format!("outgoing weights of {source} sum to {sum}, not 1"),
                sum: Some(sum),
            });
        }
    }

    ValidationReport::from_findings(findings)
}

/// Validate a draft and, when it is sound, return the canonical crossmap.
pub fn build_crossmap(draft: &EdgeListDraft) -> Result<Crossmap, ValidationReport> {
    let report = validate_edges(&draft.edges);
    if report.ok {
        Ok(Crossmap::from_valid_edges(draft.edges.clone()))
    } else {
        Err(report)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("identity crossmap needs at least one key")]
pub struct EmptyKeySet;

/// One unit edge `k -> k` per key.
pub fn identity_crossmap<I>(keys: I) -> Result<Crossmap, EmptyKeySet>
where
    I: IntoIterator<Item = Key>,
{
    let keys: BTreeSet<Key> = keys.into_iter().collect();
    if keys.is_empty() {
        return Err(EmptyKeySet);
    }
    let edges = keys
        .into_iter()
        .map(|k| Edge::new(k.clone(), k, Rational::one()))
        .collect();
    Ok(Crossmap::from_valid_edges(edges))
}

/// A mass value as read from data: either a number or an explicit missing marker.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum MassValue {
    Known(Rational),
    Missing,
}

impl MassValue {
    pub fn known(&self) -> Option<&Rational> {
        match self {
            MassValue::Known(r) => Some(r),
            MassValue::Missing => None,
        }
    }
}

impl From<Rational> for MassValue {
    fn from(value: Rational) -> Self {
        MassValue::Known(value)
    }
}

impl fmt::Display for MassValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MassValue::Known(r) => write!(f, "{r}"),
            MassValue::Missing => f.write_str("NA"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("duplicate key {0}")]
pub struct DuplicateKey(pub Key);

/// Key-indexed masses that share a meaningful total.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct SharedMassArray {
    entries: BTreeMap<Key, MassValue>,
}

impl SharedMassArray {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build from `(key, value)` pairs, rejecting repeated keys.
    pub fn from_entries<I, V>(entries: I) -> Result<Self, DuplicateKey>
    where
        I: IntoIterator<Item = (Key, V)>,
        V: Into<MassValue>,
    {
        let mut array = SharedMassArray::new();
        for (key, value) in entries {
            array.insert(key, value)?;
        }
        Ok(array)
    }

    pub fn insert(&mut self, key: Key, value: impl Into<MassValue>) -> Result<(), DuplicateKey> {
        use std::collections::btree_map::Entry;
        match self.entries.entry(key) {
            Entry::Occupied(e) => Err(DuplicateKey(e.key().clone())),
            Entry::Vacant(e) => {
                e.insert(value.into());
                Ok(())
            }
        }
    }

    pub fn get(&self, key: &str) -> Option<&MassValue> {
        self.entries.get(key)
    }

    /// Known value for `key`, if present and not missing.
    pub fn value(&self, key: &str) -> Option<&Rational> {
        self.get(key).and_then(MassValue::known)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&Key, &MassValue)> {
        self.entries.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &Key> {
        self.entries.keys()
    }

    /// Sum of known values; missing entries contribute nothing.
    pub fn total(&self) -> Rational {
        self.entries.values().filter_map(MassValue::known).sum()
    }

    pub fn has_missing(&self) -> bool {
        self.entries.values().any(|v| *v == MassValue::Missing)
    }

    pub(crate) fn from_map(entries: BTreeMap<Key, MassValue>) -> Self {
        SharedMassArray { entries }
    }

    pub(crate) fn into_map(self) -> BTreeMap<Key, MassValue> {
        self.entries
    }
}
