//! Recover the crossmap hidden inside an opaque transformation.
//!
//! A linear, mass-redistributing transformation applied to the indicator
//! array of source key `j` (`j` = 1, every other source = 0) returns the
//! outgoing weights of `j`. Probing every source key in turn therefore
//! reads off the whole weight matrix, one column per probe.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::process::{Command, Stdio};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::Serialize;

use crate::io::{array_to_string, read_array};
use crate::key::Key;
use crate::model::{build_crossmap, Crossmap, Edge, EdgeListDraft, MassValue, SharedMassArray};
use crate::rational::Rational;

/// Nearest fraction to `value` whose denominator is at most `max_denominator`.
/// Ties go to the smaller denominator.
///
/// Panics if `max_denominator` is zero.
pub fn rationalize(value: &Rational, max_denominator: u64) -> Rational {
    assert!(max_denominator >= 1, "max_denominator must be at least 1");
    let limit = BigInt::from(max_denominator);
    if *value.denom() <= limit {
        return value.clone();
    }
    // Convergents p1/q1 (last one within the limit) and p0/q0 (the one before).
    let (mut p0, mut q0, mut p1, mut q1) =
        (BigInt::zero(), BigInt::one(), BigInt::one(), BigInt::zero());
    let (mut n, mut d) = (value.numer().clone(), value.denom().clone());
    while !d.is_zero() {
        let a = n.div_floor(&d);
        let q2 = &q0 + &a * &q1;
        if q2 > limit {
            break;
        }
        let p2 = &p0 + &a * &p1;
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let rem = &n - &a * &d;
        (n, d) = (d, rem);
    }
    let k = (&limit - &q0) / &q1;
    let semi =
        Rational::from_bigints(&p0 + &k * &p1, &q0 + &k * &q1).expect("positive denominator");
    let conv = Rational::from_bigints(p1, q1).expect("positive denominator");
    let semi_gap = (&semi - value).abs();
    let conv_gap = (&conv - value).abs();
    match semi_gap.cmp(&conv_gap) {
        std::cmp::Ordering::Less => semi,
        std::cmp::Ordering::Greater => conv,
        std::cmp::Ordering::Equal => {
            if semi.denom() < conv.denom() {
                semi
            } else {
                conv
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ProbeError {
    #[error("no source keys to probe")]
    NoSources,
    #[error("probe for {key} failed: {message}")]
    Failed { key: Key, message: String },
    #[error("probe for {key} returned unusable output: {message}")]
    InvalidOutput { key: Key, message: String },
    #[error("transformation is not deterministic: probing {key} twice gave different outputs")]
    Nondeterministic { key: Key },
    #[error("could not run probe command: {0}")]
    Spawn(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlackboxKind {
    InProcess,
    ExternalCommand,
}

/// A transformation from one shared mass array to another whose embedded
/// crossmap is unknown.
pub trait Blackbox: Sync {
    fn kind(&self) -> BlackboxKind;
    /// Run once on `input`. `probe_key` identifies the probe for error messages.
    fn run(&self, probe_key: &Key, input: &SharedMassArray) -> Result<SharedMassArray, ProbeError>;
}

/// An array-to-array function in the current process.
pub struct InProcess<F>(pub F);

impl<F> Blackbox for InProcess<F>
where
    F: Fn(&SharedMassArray) -> Result<SharedMassArray, String> + Sync,
{
    fn kind(&self) -> BlackboxKind {
        BlackboxKind::InProcess
    }

    fn run(&self, probe_key: &Key, input: &SharedMassArray) -> Result<SharedMassArray, ProbeError> {
        (self.0)(input).map_err(|message| ProbeError::Failed {
            key: probe_key.clone(),
            message,
        })
    }
}

/// A program that reads an array CSV on stdin and writes one on stdout.
/// A non-zero exit status fails the probe.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExternalCommand {
    pub program: String,
    pub args: Vec<String>,
}

impl ExternalCommand {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        ExternalCommand {
            program: program.into(),
            args,
        }
    }
}

impl Blackbox for ExternalCommand {
    fn kind(&self) -> BlackboxKind {
        BlackboxKind::ExternalCommand
    }

    fn run(&self, probe_key: &Key, input: &SharedMassArray) -> Result<SharedMassArray, ProbeError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()?;
        let payload = array_to_string(input);
        let mut stdin = child.stdin.take().expect("stdin is piped");
        // Feed stdin from a separate thread so a chatty child cannot deadlock us.
        let writer = std::thread::spawn(move || stdin.write_all(payload.as_bytes()));
        let output = child.wait_with_output()?;
        let write_result = writer.join().expect("stdin writer panicked");
        if !output.status.success() {
            return Err(ProbeError::Failed {
                key: probe_key.clone(),
                message: format!(
                    "{} ({})",
                    output.status,
                    String::from_utf8_lossy(&output.stderr).trim()
                ),
            });
        }
        if let Err(err) = write_result {
            if err.kind() != std::io::ErrorKind::BrokenPipe {
                return Err(ProbeError::Spawn(err));
            }
        }
        read_array(output.stdout.as_slice()).map_err(|e| ProbeError::InvalidOutput {
            key: probe_key.clone(),
            message: e.to_string(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProbeOptions {
    /// Allowed distance of a source's total from one, and of a snapped weight
    /// from its raw value.
    pub tolerance: Rational,
    /// Snap weights to the nearest fraction with at most this denominator.
    pub rationalize_max_denominator: Option<u64>,
    /// Concurrent probes after the determinism check.
    pub jobs: usize,
    /// Number of leading source keys probed twice to check determinism.
    pub determinism_sample: usize,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions {
            tolerance: Rational::new(1, 1_000_000_000),
            rationalize_max_denominator: None,
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            determinism_sample: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NonconformingReason {
    /// Outgoing total differs from one by more than the tolerance.
    TotalOutOfTolerance,
    /// Some weight is negative or above one.
    WeightOutOfRange,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NonconformingSource {
    pub key: Key,
    pub total: Rational,
    pub reason: NonconformingReason,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InexactSource {
    pub key: Key,
    pub total: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExtractionResult {
    /// Present only when every source's total is exactly one.
    #[serde(skip)]
    pub crossmap: Option<Crossmap>,
    /// Non-zero probe outputs per source key, before any snapping.
    pub raw_weights: BTreeMap<Key, BTreeMap<Key, Rational>>,
    pub nonconforming_sources: Vec<NonconformingSource>,
    /// Within tolerance of one but not exactly one; rationalization may fix these.
    pub inexact_sources: Vec<InexactSource>,
    pub tolerance_used: Rational,
    pub rationalized: bool,
    pub probes_sent: usize,
}

fn indicator(keys: &[Key], hot: usize) -> SharedMassArray {
    let entries = keys.iter().enumerate().map(|(i, k)| {
        let v = if i == hot {
            Rational::one()
        } else {
            Rational::zero()
        };
        (k.clone(), v)
    });
    SharedMassArray::from_entries(entries).expect("keys are unique")
}

fn nonzero_outputs(
    key: &Key,
    output: SharedMassArray,
) -> Result<BTreeMap<Key, Rational>, ProbeError> {
    let mut weights = BTreeMap::new();
    for (target, value) in output.iter() {
        match value {
            MassValue::Missing => {
                return Err(ProbeError::InvalidOutput {
                    key: key.clone(),
                    message: format!("missing value for {target}"),
                })
            }
            MassValue::Known(v) if !v.is_zero() => {
                weights.insert(target.clone(), v.clone());
            }
            MassValue::Known(_) => {}
        }
    }
    Ok(weights)
}

/// Probe `transform` with one indicator array per source key and assemble
/// the implied crossmap.
pub fn probe_blackbox(
    transform: &dyn Blackbox,
    source_keys: &[Key],
    opts: &ProbeOptions,
) -> Result<ExtractionResult, ProbeError> {
    let mut seen = BTreeSet::new();
    let keys: Vec<Key> = source_keys
        .iter()
        .filter(|k| seen.insert(*k))
        .cloned()
        .collect();
    if keys.is_empty() {
        return Err(ProbeError::NoSources);
    }

    let probe = |j: usize| -> Result<BTreeMap<Key, Rational>, ProbeError> {
        let output = transform.run(&keys[j], &indicator(&keys, j))?;
        nonzero_outputs(&keys[j], output)
    };

    let sample = opts.determinism_sample.min(keys.len());
    let mut columns = Vec::with_capacity(keys.len());
    for (j, key) in keys.iter().enumerate().take(sample) {
        let first = probe(j)?;
        if probe(j)? != first {
            return Err(ProbeError::Nondeterministic { key: key.clone() });
        }
        columns.push(first);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    let rest: Vec<BTreeMap<Key, Rational>> = pool.install(|| {
        (sample..keys.len())
            .into_par_iter()
            .map(probe)
            .collect::<Result<_, _>>()
    })?;
    columns.extend(rest);

    let one = Rational::one();
    let mut raw_weights = BTreeMap::new();
    let mut nonconforming_sources = Vec::new();
    let mut inexact_sources = Vec::new();
    let mut edges = Vec::new();
    for (key, raw) in keys.iter().zip(columns) {
        let weights: Vec<(Key, Rational)> = raw
            .iter()
            .map(|(target, w)| {
                let snapped = match opts.rationalize_max_denominator {
                    Some(max) => {
                        let candidate = rationalize(w, max);
                        if (&candidate - w).abs() <= opts.tolerance {
                            candidate
                        } else {
                            w.clone()
                        }
                    }
                    None => w.clone(),
                };
                (target.clone(), snapped)
            })
            .collect();
        let total: Rational = weights.iter().map(|(_, w)| w).sum();
        if (&total - &one).abs() > opts.tolerance {
            nonconforming_sources.push(NonconformingSource {
                key: key.clone(),
                total,
                reason: NonconformingReason::TotalOutOfTolerance,
            });
        } else if !weights.iter().all(|(_, w)| w.is_unit_weight()) {
            nonconforming_sources.push(NonconformingSource {
                key: key.clone(),
                total,
                reason: NonconformingReason::WeightOutOfRange,
            });
        } else if !total.is_one() {
            inexact_sources.push(InexactSource {
                key: key.clone(),
                total,
            });
        } else {
            edges.extend(
                weights
                    .into_iter()
                    .map(|(t, w)| Edge::new(key.clone(), t, w)),
            );
        }
        raw_weights.insert(key.clone(), raw);
    }

    let crossmap = if nonconforming_sources.is_empty() && inexact_sources.is_empty() {
        Some(
            build_crossmap(&EdgeListDraft::new(edges))
                .expect("every source total checked to be exactly one"),
        )
    } else {
        None
    };
    Ok(ExtractionResult {
        crossmap,
        raw_weights,
        nonconforming_sources,
        inexact_sources,
        tolerance_used: opts.tolerance.clone(),
        rationalized: opts.rationalize_max_denominator.is_some(),
        probes_sent: keys.len() + sample,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::{apply_transform, TransformOptions};
    use proptest::prelude::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn k(s: &str) -> Key {
        Key::new(s).unwrap()
    }

    fn q(text: &str) -> Rational {
        text.parse().unwrap()
    }

    /// Exhaustive search over every denominator up to `max`.
    fn nearest_by_search(x: &Rational, max: i64) -> Rational {
        let mut best: Option<(Rational, Rational)> = None;
        for den in 1..=max {
            let scaled = x * Rational::integer(den);
            let lo = scaled.floor();
            for num in [lo.clone(), lo + 1] {
                let cand = Rational::from_bigints(num, BigInt::from(den)).unwrap();
                let gap = (&cand - x).abs();
                let better = match &best {
                    None => true,
                    Some((_, g)) => gap < *g,
                };
                if better {
                    best = Some((cand, gap));
                }
            }
        }
        best.unwrap().0
    }

    #[test]
    fn rationalize_examples() {
        assert_eq!(rationalize(&q("0.5"), 10), Rational::new(1, 2));
        assert_eq!(rationalize(&q("0.333333"), 100), Rational::new(1, 3));
        assert_eq!(nearest_by_search(&q("0.333333"), 100), Rational::new(1, 3));
        assert_eq!(rationalize(&q("0"), 7), Rational::zero());
        assert_eq!(rationalize(&q("0.999999999"), 100), Rational::one());
        assert_eq!(rationalize(&q("-0.666667"), 10), Rational::new(-2, 3));
        assert_eq!(rationalize(&q("3.14159265"), 1000), Rational::new(355, 113));
    }

    #[test]
    fn rationalize_breaks_ties_toward_smaller_denominator() {
        // With q <= 2, 0/1 and 1/2 are both 1/4 away.
        assert_eq!(rationalize(&Rational::new(1, 4), 2), Rational::zero());
        assert_eq!(nearest_by_search(&Rational::new(1, 4), 2), Rational::zero());
        // 3/4 between 1/2 and 1/1 with q <= 2: 1/1 has the smaller denominator.
        assert_eq!(rationalize(&Rational::new(3, 4), 2), Rational::one());
    }

    proptest! {
        #[test]
        fn rationalize_matches_exhaustive_search(n in -5000i64..5000, d in 1i64..5000, max in 1i64..60) {
            let x = Rational::new(n, d);
            prop_assert_eq!(rationalize(&x, max as u64), nearest_by_search(&x, max));
        }
    }

    fn country() -> Crossmap {
        crate::io::read_crossmap(
            "from,to,weight\nAUS,AUS,1\nBLX,BEL,1/2\nBLX,LUX,1/2\nE.GER,DEU,1\nW.GER,DEU,1\n"
                .as_bytes(),
        )
        .unwrap()
        .unwrap()
    }

    fn closure_for(
        map: Crossmap,
    ) -> impl Fn(&SharedMassArray) -> Result<SharedMassArray, String> + Sync {
        move |x| {
            apply_transform(&map, x, &TransformOptions::default())
                .map(|(y, _)| y)
                .map_err(|e| e.to_string())
        }
    }

    #[test]
    fn recovers_country_map_in_process() {
        let map = country();
        let result = probe_blackbox(
            &InProcess(closure_for(map.clone())),
            map.sources(),
            &ProbeOptions::default(),
        )
        .unwrap();
        assert_eq!(result.crossmap, Some(map.clone()));
        assert_eq!(result.probes_sent, map.sources().len() + 1);
        assert!(!result.rationalized);
    }

    #[test]
    fn counts_probes() {
        let calls = AtomicUsize::new(0);
        let map = country();
        let inner = closure_for(map.clone());
        let counting = InProcess(|x: &SharedMassArray| {
            calls.fetch_add(1, Ordering::SeqCst);
            inner(x)
        });
        let opts = ProbeOptions {
            determinism_sample: 2,
            jobs: 2,
            ..Default::default()
        };
        let result = probe_blackbox(&counting, map.sources(), &opts).unwrap();
        assert_eq!(calls.load(Ordering::SeqCst), map.sources().len() + 2);
        assert_eq!(result.probes_sent, map.sources().len() + 2);
    }

    #[test]
    fn detects_nondeterminism() {
        let calls = AtomicUsize::new(0);
        let flaky = InProcess(|x: &SharedMassArray| {
            let n = calls.fetch_add(1, Ordering::SeqCst) as i64;
            let total = x.total();
            SharedMassArray::from_entries([(k("t"), total * Rational::new(n + 1, 1))])
                .map_err(|e| e.to_string())
        });
        let err = probe_blackbox(&flaky, &[k("a")], &ProbeOptions::default()).unwrap_err();
        assert!(matches!(err, ProbeError::Nondeterministic { .. }));
    }

    /// Transform that rounds each output down to six decimals, as a float
    /// pipeline exporting fixed-precision text would.
    fn thirds() -> impl Fn(&SharedMassArray) -> Result<SharedMassArray, String> + Sync {
        |x: &SharedMassArray| {
            let mass = x.value("s").cloned().unwrap_or_default();
            let third = q(&(mass * Rational::new(1, 3)).to_truncated_decimal(6));
            SharedMassArray::from_entries(["t1", "t2", "t3"].map(|t| (k(t), third.clone())))
                .map_err(|e| e.to_string())
        }
    }

    #[test]
    fn snaps_truncated_thirds() {
        let opts = ProbeOptions {
            tolerance: q("1e-5"),
            rationalize_max_denominator: Some(100),
            ..Default::default()
        };
        let result = probe_blackbox(&InProcess(thirds()), &[k("s")], &opts).unwrap();
        let map = result.crossmap.unwrap();
        assert!(map.edges().iter().all(|e| e.weight == Rational::new(1, 3)));
        assert_eq!(result.raw_weights[&k("s")][&k("t1")], q("0.333333"));
        assert!(result.rationalized);
    }

    #[test]
    fn unsnapped_thirds_are_reported() {
        // Without rationalization the total 0.999999 is 1e-6 away from one.
        let loose = ProbeOptions {
            tolerance: q("1e-5"),
            ..Default::default()
        };
        let result = probe_blackbox(&InProcess(thirds()), &[k("s")], &loose).unwrap();
        assert!(result.crossmap.is_none());
        assert_eq!(result.inexact_sources[0].total, q("0.999999"));

        let strict =
            probe_blackbox(&InProcess(thirds()), &[k("s")], &ProbeOptions::default()).unwrap();
        assert!(strict.crossmap.is_none());
        assert_eq!(
            strict.nonconforming_sources[0].reason,
            NonconformingReason::TotalOutOfTolerance
        );
    }

    #[test]
    fn dropped_sources_are_nonconforming() {
        let drops_b = InProcess(|x: &SharedMassArray| {
            let a = x.value("a").cloned().unwrap_or_default();
            SharedMassArray::from_entries([(k("z"), a)]).map_err(|e| e.to_string())
        });
        let result = probe_blackbox(&drops_b, &[k("a"), k("b")], &ProbeOptions::default()).unwrap();
        assert!(result.crossmap.is_none());
        assert_eq!(result.nonconforming_sources.len(), 1);
        assert_eq!(result.nonconforming_sources[0].key, k("b"));
        assert_eq!(result.nonconforming_sources[0].total, Rational::zero());
    }

    #[test]
    fn errors() {
        let boom = InProcess(|_: &SharedMassArray| Err("boom".to_string()));
        assert!(matches!(
            probe_blackbox(&boom, &[k("a")], &ProbeOptions::default()),
            Err(ProbeError::Failed { .. })
        ));
        assert!(matches!(
            probe_blackbox(&boom, &[], &ProbeOptions::default()),
            Err(ProbeError::NoSources)
        ));
        let missing = InProcess(|_: &SharedMassArray| {
            SharedMassArray::from_entries([(k("t"), MassValue::Missing)]).map_err(|e| e.to_string())
        });
        assert!(matches!(
            probe_blackbox(&missing, &[k("a")], &ProbeOptions::default()),
            Err(ProbeError::InvalidOutput { .. })
        ));
    }

    #[cfg(unix)]
    #[test]
    fn external_command_failure_and_echo() {
        let cat = ExternalCommand::new("cat", vec![]);
        // `cat` echoes the indicator: an identity transform.
        let result = probe_blackbox(&cat, &[k("a"), k("b")], &ProbeOptions::default()).unwrap();
        let map = result.crossmap.unwrap();
        assert_eq!(map.edges().len(), 2);
        assert!(map
            .edges()
            .iter()
            .all(|e| e.from == e.to && e.weight.is_one()));

        let fail = ExternalCommand::new("false", vec![]);
        assert!(matches!(
            probe_blackbox(&fail, &[k("a")], &ProbeOptions::default()),
            Err(ProbeError::Failed { .. })
        ));
        let missing = ExternalCommand::new("definitely-not-a-real-program-xyz", vec![]);
        assert!(matches!(
            probe_blackbox(&missing, &[k("a")], &ProbeOptions::default()),
            Err(ProbeError::Spawn(_))
        ));
    }
}
