//! Bipartite-graph view of a crossmap.
//!
//! A crossmap is partitioned into its weakly connected components, and each
//! component is labelled by the shape of its links:
//!
//! 1. a component with a single edge is `one_to_one`;
//! 2. otherwise, if one node touches every edge and every other node has
//!    degree one, the component is a star: `one_to_many` when the hub is a
//!    source, `many_to_one` when it is a target;
//! 3. everything else is `many_to_many`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::key::Key;
use crate::model::{Crossmap, Edge, SharedMassArray};
use crate::rational::Rational;
use crate::transform::TransformError;
use crate::validation::{check_array, check_coverage, ArrayPolicy};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationType {
    OneToOne,
    OneToMany,
    ManyToOne,
    ManyToMany,
}

impl RelationType {
    pub const ALL: [RelationType; 4] = [
        RelationType::OneToOne,
        RelationType::OneToMany,
        RelationType::ManyToOne,
        RelationType::ManyToMany,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationType::OneToOne => "one_to_one",
            RelationType::OneToMany => "one_to_many",
            RelationType::ManyToOne => "many_to_one",
            RelationType::ManyToMany => "many_to_many",
        }
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A maximal weakly connected subgraph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Component {
    pub sources: BTreeSet<Key>,
    pub targets: BTreeSet<Key>,
    pub edges: Vec<Edge>,
    pub relation_type: RelationType,
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Node {
    Source(usize),
    Target(usize),
}

/// Disjoint components, ordered by their smallest source key.
pub fn components(map: &Crossmap) -> Vec<Component> {
    let source_index: BTreeMap<&Key, usize> = map
        .sources()
        .iter()
        .enumerate()
        .map(|(i, k)| (k, i))
        .collect();
    let target_index: BTreeMap<&Key, usize> = map
        .targets()
        .iter()
        .enumerate()
        .map(|(i, k)| (k, i))
        .collect();

    let mut source_adj: Vec<Vec<usize>> = vec![Vec::new(); map.sources().len()];
    let mut target_adj: Vec<Vec<usize>> = vec![Vec::new(); map.targets().len()];
    for edge in map.edges() {
        let (s, t) = (source_index[&edge.from], target_index[&edge.to]);
        source_adj[s].push(t);
        target_adj[t].push(s);
    }

    let mut label = vec![usize::MAX; map.sources().len()];
    let mut target_seen = vec![false; map.targets().len()];
    let mut groups: Vec<(BTreeSet<usize>, BTreeSet<usize>)> = Vec::new();
    // Sources are visited in key order, so group ids follow the smallest source key.
    for start in 0..map.sources().len() {
        if label[start] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut group = (BTreeSet::new(), BTreeSet::new());
        let mut queue = VecDeque::from([Node::Source(start)]);
        label[start] = id;
        while let Some(node) = queue.pop_front() {
            match node {
                Node::Source(s) => {
                    group.0.insert(s);
                    for &t in &source_adj[s] {
                        if !target_seen[t] {
                            target_seen[t] = true;
                            queue.push_back(Node::Target(t));
                        }
                    }
                }
                Node::Target(t) => {
                    group.1.insert(t);
                    for &s in &target_adj[t] {
                        if label[s] == usize::MAX {
                            label[s] = id;
                            queue.push_back(Node::Source(s));
                        }
                    }
                }
            }
        }
        groups.push(group);
    }

    let mut edges_by_group: Vec<Vec<Edge>> = vec![Vec::new(); groups.len()];
    for edge in map.edges() {
        edges_by_group[label[source_index[&edge.from]]].push(edge.clone());
    }

    groups
        .into_iter()
        .zip(edges_by_group)
        .map(|((sources, targets), edges)| {
            let relation_type = classify_edges(&edges);
            Component {
                sources: sources
                    .into_iter()
                    .map(|i| map.sources()[i].clone())
                    .collect(),
                targets: targets
                    .into_iter()
                    .map(|i| map.targets()[i].clone())
                    .collect(),
                edges,
                relation_type,
            }
        })
        .collect()
}

fn classify_edges(edges: &[Edge]) -> RelationType {
    if edges.len() == 1 {
        return RelationType::OneToOne;
    }
    let mut out_degree: BTreeMap<&Key, usize> = BTreeMap::new();
    let mut in_degree: BTreeMap<&Key, usize> = BTreeMap::new();
    for e in edges {
        *out_degree.entry(&e.from).or_default() += 1;
        *in_degree.entry(&e.to).or_default() += 1;
    }
    let m = edges.len();
    let star = |hubs: &BTreeMap<&Key, usize>, leaves: &BTreeMap<&Key, usize>| {
        hubs.len() == 1 && hubs.values().all(|&d| d == m) && leaves.values().all(|&d| d == 1)
    };
    if star(&out_degree, &in_degree) {
        RelationType::OneToMany
    } else if star(&in_degree, &out_degree) {
        RelationType::ManyToOne
    } else {
        RelationType::ManyToMany
    }
}

/// Relation type of a component, recomputed from its edges.
pub fn classify(component: &Component) -> RelationType {
    classify_edges(&component.edges)
}

pub fn type_counts(components: &[Component]) -> BTreeMap<RelationType, usize> {
    let mut counts: BTreeMap<RelationType, usize> =
        RelationType::ALL.iter().map(|t| (*t, 0)).collect();
    for c in components {
        *counts.entry(c.relation_type).or_default() += 1;
    }
    counts
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TargetSummary {
    pub target: Key,
    pub incoming_count: usize,
    pub incoming_sources: Vec<Key>,
}

/// Per-target aggregation overview plus crossmap-wide totals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Summary {
    /// Ordered by incoming count (descending), then target key.
    pub targets: Vec<TargetSummary>,
    pub edge_count: usize,
    pub source_count: usize,
    pub target_count: usize,
    pub component_count: usize,
    pub component_type_counts: BTreeMap<RelationType, usize>,
}

pub fn summarize(map: &Crossmap) -> Summary {
    let mut incoming: BTreeMap<&Key, Vec<Key>> = BTreeMap::new();
    for e in map.edges() {
        incoming.entry(&e.to).or_default().push(e.from.clone());
    }
    let mut targets: Vec<TargetSummary> = incoming
        .into_iter()
        .map(|(target, mut sources)| {
            sources.sort();
            TargetSummary {
                target: target.clone(),
                incoming_count: sources.len(),
                incoming_sources: sources,
            }
        })
        .collect();
    targets.sort_by(|a, b| {
        b.incoming_count
            .cmp(&a.incoming_count)
            .then_with(|| a.target.cmp(&b.target))
    });
    let comps = components(map);
    Summary {
        targets,
        edge_count: map.edges().len(),
        source_count: map.sources().len(),
        target_count: map.targets().len(),
        component_count: comps.len(),
        component_type_counts: type_counts(&comps),
    }
}

/// How much a crossmap can (and, given data, does) rely on split weights.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ImputationMetrics {
    pub component_type_counts: BTreeMap<RelationType, usize>,
    /// Edges with weight below one.
    pub fractional_edge_count: usize,
    /// Sources with more than one outgoing edge.
    pub split_source_count: usize,
    /// `split_source_count / source_count`.
    pub potential_split_share: Rational,
    /// Share of the array's total mass that enters split sources. Zero when the
    /// array total is zero.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realized_split_mass_share: Option<Rational>,
}

pub fn imputation_metrics(
    map: &Crossmap,
    array: Option<&SharedMassArray>,
) -> Result<ImputationMetrics, TransformError> {
    let split_sources: BTreeSet<&Key> = map.split_sources().collect();
    let realized_split_mass_share = match array {
        None => None,
        Some(array) => {
            let findings = check_array(array, ArrayPolicy::AllowZero);
            if !findings.is_empty() {
                return Err(TransformError::InvalidArray(findings));
            }
            let coverage = check_coverage(map, array);
            if !coverage.conformable {
                return Err(TransformError::Uncovered(coverage));
            }
            let total = array.total();
            let split: Rational = array
                .iter()
                .filter(|(k, _)| split_sources.contains(k))
                .filter_map(|(_, v)| v.known())
                .sum();
            Some(if total.is_zero() {
                Rational::zero()
            } else {
                split / total
            })
        }
    };
    Ok(ImputationMetrics {
        component_type_counts: type_counts(&components(map)),
        fractional_edge_count: map.edges().iter().filter(|e| e.is_fractional()).count(),
        split_source_count: split_sources.len(),
        potential_split_share: Rational::new(
            split_sources.len() as i64,
            map.sources().len() as i64,
        ),
        realized_split_mass_share,
    })
}
