//! Checks that can run before, or independently of, a transform.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::key::Key;
use crate::model::{
    validate_edges, Crossmap, EdgeListDraft, MassValue, SharedMassArray, ValidationReport,
};
use crate::rational::Rational;

/// Per-source mass-preserving check on a raw edge list.
///
/// Applies exactly the rule [`crate::build_crossmap`] enforces, so the report
/// is ok iff building succeeds.
pub fn check_mass_preserving(draft: &EdgeListDraft) -> ValidationReport {
    validate_edges(&draft.edges)
}

/// Whether every key of an array is a source of the crossmap.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoverageReport {
    pub conformable: bool,
    pub uncovered_keys: BTreeSet<Key>,
    pub mass_at_risk: Rational,
}

/// Coverage check: lists array keys without mapping instructions and the
/// total known mass attached to them.
pub fn check_coverage(map: &Crossmap, array: &SharedMassArray) -> CoverageReport {
    let mut uncovered_keys = BTreeSet::new();
    let mut mass_at_risk = Rational::zero();
    for (key, value) in array.iter() {
        if !map.has_source(key.as_str()) {
            uncovered_keys.insert(key.clone());
            if let MassValue::Known(v) = value {
                mass_at_risk += v;
            }
        }
    }
    CoverageReport {
        conformable: uncovered_keys.is_empty(),
        uncovered_keys,
        mass_at_risk,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayPolicy {
    /// Zero masses are fine (the sanctioned replacement for missing values).
    #[default]
    AllowZero,
    /// Every mass must be strictly positive.
    StrictPositive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrayFindingKind {
    MissingValue,
    NegativeValue,
    NonpositiveValue,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ArrayFinding {
    pub key: Key,
    pub kind: ArrayFindingKind,
    pub value: Option<Rational>,
    pub hint: &'static str,
}

/// Array hygiene: missing markers and negative masses are always reported;
/// zeros only under [`ArrayPolicy::StrictPositive`].
pub fn check_array(array: &SharedMassArray, policy: ArrayPolicy) -> Vec<ArrayFinding> {
    let mut findings = Vec::new();
    for (key, value) in array.iter() {
        let finding = match value {
            MassValue::Missing => Some(ArrayFinding {
                key: key.clone(),
                kind: ArrayFindingKind::MissingValue,
                value: None,
                hint: "replace with zero explicitly",
            }),
            MassValue::Known(v) if v.is_negative() => Some(ArrayFinding {
                key: key.clone(),
                kind: ArrayFindingKind::NegativeValue,
                value: Some(v.clone()),
                hint: "masses must be non-negative",
            }),
            MassValue::Known(v) if v.is_zero() && policy == ArrayPolicy::StrictPositive => {
                Some(ArrayFinding {
                    key: key.clone(),
                    kind: ArrayFindingKind::NonpositiveValue,
                    value: Some(v.clone()),
                    hint: "strict-positive policy forbids zero masses",
                })
            }
            MassValue::Known(_) => None,
        };
        findings.extend(finding);
    }
    findings
}
