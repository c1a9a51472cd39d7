//! The crossmap transform: join each source mass with its outgoing edges,
//! multiply by the edge weight, and sum per target key.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use crate::key::Key;
use crate::model::{Crossmap, MassValue, SharedMassArray};
use crate::rational::Rational;
use crate::validation::{check_array, check_coverage, ArrayFinding, ArrayPolicy, CoverageReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OnUncovered {
    Error,
    DropAndReport,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TransformOptions {
    /// Emit every target key, including those receiving zero mass.
    pub emit_zero_targets: bool,
    pub on_uncovered: OnUncovered,
}

impl Default for TransformOptions {
    fn default() -> Self {
        TransformOptions {
            emit_zero_targets: true,
            on_uncovered: OnUncovered::Error,
        }
    }
}

/// Mass accounting for one transform. `input_total = output_total + dropped_mass`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TransformReceipt {
    pub input_total: Rational,
    pub output_total: Rational,
    pub dropped_mass: Rational,
    /// Mass that entered sources with more than one outgoing edge.
    pub split_mass: Rational,
    pub dropped_keys: BTreeSet<Key>,
}

impl TransformReceipt {
    pub fn is_balanced(&self) -> bool {
        self.input_total == &self.output_total + &self.dropped_mass
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransformError {
    #[error(
        "{} array key(s) have no mapping instructions (mass at risk {})",
        .0.uncovered_keys.len(),
        .0.mass_at_risk
    )]
    Uncovered(CoverageReport),
    #[error("array contains {} invalid value(s); replace missing values explicitly before transforming", .0.len())]
    InvalidArray(Vec<ArrayFinding>),
    #[error("step {step}: {error}")]
    AtStep {
        step: usize,
        #[source]
        error: Box<TransformError>,
    },
    #[error("appended keys already present: {0:?}")]
    KeyCollision(Vec<Key>),
}

/// Redistribute `array` from the crossmap's source keys to its target keys.
///
/// Every value must be known and non-negative. Keys absent from the
/// crossmap's sources fail the transform unless the options ask for them to
/// be dropped, in which case their mass shows up in the receipt.
pub fn apply_transform(
    map: &Crossmap,
    array: &SharedMassArray,
    opts: &TransformOptions,
) -> Result<(SharedMassArray, TransformReceipt), TransformError> {
    let findings = check_array(array, ArrayPolicy::AllowZero);
    if !findings.is_empty() {
        return Err(TransformError::InvalidArray(findings));
    }
    let coverage = check_coverage(map, array);
    if !coverage.conformable && opts.on_uncovered == OnUncovered::Error {
        return Err(TransformError::Uncovered(coverage));
    }

    let mut output: BTreeMap<Key, Rational> = BTreeMap::new();
    if opts.emit_zero_targets {
        output.extend(map.targets().iter().map(|t| (t.clone(), Rational::zero())));
    }
    let mut split_mass = Rational::zero();
    let mut input_total = Rational::zero();
    for (key, value) in array.iter() {
        let MassValue::Known(mass) = value else {
            unreachable!("missing values rejected above")
        };
        input_total += mass;
        let outgoing = map.outgoing(key.as_str());
        if outgoing.len() > 1 {
            split_mass += mass;
        }
        for edge in outgoing {
            *output.entry(edge.to.clone()).or_default() += mass * &edge.weight;
        }
    }
    if !opts.emit_zero_targets {
        output.retain(|_, v| !v.is_zero());
    }

    let output_total: Rational = output.values().sum();
    let receipt = TransformReceipt {
        input_total,
        output_total,
        dropped_mass: coverage.mass_at_risk,
        split_mass,
        dropped_keys: coverage.uncovered_keys,
    };
    assert!(
        receipt.is_balanced(),
        "mass conservation violated: {receipt:?}"
    );
    let output = output
        .into_iter()
        .map(|(k, v)| (k, MassValue::Known(v)))
        .collect();
    Ok((SharedMassArray::from_map(output), receipt))
}

/// Apply crossmaps one after another, collecting a receipt per step.
pub fn apply_sequence(
    maps: &[Crossmap],
    array: &SharedMassArray,
    opts: &TransformOptions,
) -> Result<(SharedMassArray, Vec<TransformReceipt>), TransformError> {
    let mut current = array.clone();
    let mut receipts = Vec::with_capacity(maps.len());
    for (step, map) in maps.iter().enumerate() {
        let (next, receipt) =
            apply_transform(map, &current, opts).map_err(|error| TransformError::AtStep {
                step,
                error: Box::new(error),
            })?;
        receipts.push(receipt);
        current = next;
    }
    Ok((current, receipts))
}

/// Apply one crossmap to many arrays in parallel; results keep input order.
pub fn apply_batch(
    map: &Crossmap,
    arrays: &[SharedMassArray],
    opts: &TransformOptions,
) -> Vec<Result<(SharedMassArray, TransformReceipt), TransformError>> {
    arrays
        .par_iter()
        .map(|array| apply_transform(map, array, opts))
        .collect()
}

/// Remove categories before a transform, reporting the mass removed.
pub fn drop_keys(array: &SharedMassArray, keys: &BTreeSet<Key>) -> (SharedMassArray, Rational) {
    let mut entries = array.clone().into_map();
    let mut dropped = Rational::zero();
    for key in keys {
        if let Some(MassValue::Known(v)) = entries.remove(key) {
            dropped += v;
        }
    }
    (SharedMassArray::from_map(entries), dropped)
}

/// Attach new categories after a transform. Existing keys are never overwritten.
pub fn append_keys(
    array: &SharedMassArray,
    new_entries: &SharedMassArray,
) -> Result<SharedMassArray, TransformError> {
    let collisions: Vec<Key> = new_entries
        .keys()
        .filter(|k| array.contains_key(k.as_str()))
        .cloned()
        .collect();
    if !collisions.is_empty() {
        return Err(TransformError::KeyCollision(collisions));
    }
    let mut entries = array.clone().into_map();
    entries.extend(new_entries.iter().map(|(k, v)| (k.clone(), v.clone())));
    Ok(SharedMassArray::from_map(entries))
}
