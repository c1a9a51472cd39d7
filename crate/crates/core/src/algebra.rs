//! Matrix view of crossmaps: dense encoding, matrix-vector product,
//! composition, and reversal.
//!
//! The dense encoding is the reference form used to cross-check the
//! edge-list transform and for export. Composition and reversal work on the
//! sparse edge lists directly.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::key::Key;
use crate::model::{
    build_crossmap, validate_edges, Crossmap, Edge, EdgeListDraft, FindingCode, SharedMassArray,
    ValidationReport,
};
use crate::rational::Rational;

/// Row-stochastic `sources x targets` grid of weights.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MatrixEncoding {
    pub row_keys: Vec<Key>,
    pub col_keys: Vec<Key>,
    /// Row-major; `values[j][k]` is the weight from `row_keys[j]` to `col_keys[k]`.
    pub values: Vec<Vec<Rational>>,
}

impl MatrixEncoding {
    pub fn row_sums(&self) -> Vec<Rational> {
        self.values.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn nonzero_count(&self) -> usize {
        self.values
            .iter()
            .flatten()
            .filter(|v| !v.is_zero())
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AlgebraError {
    #[error("vector has length {actual}, matrix has {expected} rows")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("intermediate keys not covered by the next crossmap: {unmatched:?}")]
    ChainCoverage { unmatched: Vec<Key> },
    #[error("array is not conformable with the crossmap sources: {keys:?}")]
    NotConformable { keys: Vec<Key> },
    #[error("nothing to compose")]
    EmptyChain,
}

pub fn to_matrix(map: &Crossmap) -> MatrixEncoding {
    let col_index: BTreeMap<&Key, usize> = map
        .targets()
        .iter()
        .enumerate()
        .map(|(i, k)| (k, i))
        .collect();
    let values = map
        .sources()
        .iter()
        .map(|source| {
            let mut row = vec![Rational::zero(); map.targets().len()];
            for edge in map.outgoing(source.as_str()) {
                row[col_index[&edge.to]] = edge.weight.clone();
            }
            row
        })
        .collect();
    MatrixEncoding {
        row_keys: map.sources().to_vec(),
        col_keys: map.targets().to_vec(),
        values,
    }
}

/// `y = C' x`: `y[k] = sum_j values[j][k] * x[j]`.
pub fn matvec_dense(m: &MatrixEncoding, x: &[Rational]) -> Result<Vec<Rational>, AlgebraError> {
    if x.len() != m.row_keys.len() {
        return Err(AlgebraError::DimensionMismatch {
            expected: m.row_keys.len(),
            actual: x.len(),
        });
    }
    let mut y = vec![Rational::zero(); m.col_keys.len()];
    for (row, xj) in m.values.iter().zip(x) {
        for (yk, c) in y.iter_mut().zip(row) {
            if !c.is_zero() {
                *yk += c * xj;
            }
        }
    }
    Ok(y)
}

/// Align an array to the crossmap's source order, padding absent sources with zero.
pub fn dense_vector(
    map: &Crossmap,
    array: &SharedMassArray,
) -> Result<Vec<Rational>, AlgebraError> {
    let foreign: Vec<Key> = array
        .iter()
        .filter(|(k, v)| !map.has_source(k.as_str()) || v.known().is_none())
        .map(|(k, _)| k.clone())
        .collect();
    if !foreign.is_empty() {
        return Err(AlgebraError::NotConformable { keys: foreign });
    }
    Ok(map
        .sources()
        .iter()
        .map(|s| array.value(s.as_str()).cloned().unwrap_or_default())
        .collect())
}

/// Single crossmap equivalent to applying `first` and then `second`.
///
/// Every target of `first` must be a source of `second`. Result weights are
/// `w_ac = sum_b w_ab * w_bc`.
pub fn compose(first: &Crossmap, second: &Crossmap) -> Result<Crossmap, AlgebraError> {
    let unmatched: Vec<Key> = first
        .targets()
        .iter()
        .filter(|t| !second.has_source(t.as_str()))
        .cloned()
        .collect();
    if !unmatched.is_empty() {
        return Err(AlgebraError::ChainCoverage { unmatched });
    }
    let mut weights: BTreeMap<(Key, Key), Rational> = BTreeMap::new();
    for ab in first.edges() {
        for bc in second.outgoing(ab.to.as_str()) {
            *weights.entry((ab.from.clone(), bc.to.clone())).or_default() +=
                &ab.weight * &bc.weight;
        }
    }
    let draft: EdgeListDraft = weights
        .into_iter()
        .filter(|(_, w)| !w.is_zero())
        .map(|((from, to), weight)| Edge::new(from, to, weight))
        .collect();
    let composed = build_crossmap(&draft).unwrap_or_else(|report| {
        panic!("product of row-stochastic maps must be row-stochastic: {report:?}")
    });
    Ok(composed)
}

/// Left-to-right fold of [`compose`]; the error carries the failing link index.
pub fn compose_all(maps: &[Crossmap]) -> Result<Crossmap, (usize, AlgebraError)> {
    let (head, rest) = maps.split_first().ok_or((0, AlgebraError::EmptyChain))?;
    rest.iter()
        .enumerate()
        .try_fold(head.clone(), |acc, (i, next)| {
            compose(&acc, next).map_err(|e| (i + 1, e))
        })
}

/// Transpose a crossmap, succeeding only if the transposed edges are themselves
/// mass-preserving (every target's incoming weights sum to one).
pub fn reverse(map: &Crossmap) -> Result<Crossmap, ValidationReport> {
    let transposed: Vec<Edge> = map
        .edges()
        .iter()
        .map(|e| Edge::new(e.to.clone(), e.from.clone(), e.weight.clone()))
        .collect();
    let mut report = validate_edges(&transposed);
    if report.ok {
        return Ok(build_crossmap(&EdgeListDraft::new(transposed)).expect("validated above"));
    }
    let mut incoming: BTreeMap<&Key, BTreeSet<&Key>> = BTreeMap::new();
    for e in map.edges() {
        incoming.entry(&e.to).or_default().insert(&e.from);
    }
    for finding in &mut report.findings {
        if finding.code != FindingCode::WeightSumNotOne {
            continue;
        }
        if let crate::model::Subject::Key { key } = &finding.subject {
            let links = incoming.get(key).map_or(0, BTreeSet::len);
            let all_unit = map
                .edges()
                .iter()
                .filter(|e| &e.to == key)
                .all(|e| e.weight.is_one());
            let weights = if all_unit {
                "weights of one".to_string()
            } else {
                format!(
                    "weights summing to {}",
                    finding.sum.clone().unwrap_or_default()
                )
            };
            finding.message = format!(
                "reversed source {key} would have {links} outgoing links with {weights}, violating the mass-preserving condition"
            );
        }
    }
    Err(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::identity_crossmap;
    use proptest::prelude::*;

    fn k(s: &str) -> Key {
        Key::new(s).unwrap()
    }

    fn map(rows: &[(&str, &str, i64, i64)]) -> Crossmap {
        let draft: EdgeListDraft = rows
            .iter()
            .map(|(f, t, n, d)| Edge::new(k(f), k(t), Rational::new(*n, *d)))
            .collect();
        build_crossmap(&draft).unwrap()
    }

    fn ints(values: &[i64]) -> Vec<Rational> {
        values.iter().map(|v| Rational::integer(*v)).collect()
    }

    fn country() -> Crossmap {
        map(&[
            ("BLX", "BEL", 1, 2),
            ("BLX", "LUX", 1, 2),
            ("E.GER", "DEU", 1, 1),
            ("W.GER", "DEU", 1, 1),
            ("AUS", "AUS", 1, 1),
        ])
    }

    #[test]
    fn country_matrix() {
        let m = to_matrix(&country());
        let rows: Vec<&str> = m.row_keys.iter().map(Key::as_str).collect();
        assert_eq!(rows, ["AUS", "BLX", "E.GER", "W.GER"]);
        let cols: Vec<&str> = m.col_keys.iter().map(Key::as_str).collect();
        assert_eq!(cols, ["AUS", "BEL", "DEU", "LUX"]);
        assert!(m.row_sums().iter().all(Rational::is_one));
        assert_eq!(m.nonzero_count(), 5);
        assert_eq!(m.values[1][1], Rational::new(1, 2));
        assert_eq!(m.values[1][2], Rational::zero());
        // (AUS, BLX, E.GER, W.GER) = (140, 10, 3, 4) -> (AUS, BEL, DEU, LUX) = (140, 5, 7, 5)
        let y = matvec_dense(&m, &ints(&[140, 10, 3, 4])).unwrap();
        assert_eq!(y, ints(&[140, 5, 7, 5]));
    }

    #[test]
    fn identity_matrix_and_probes() {
        let id = identity_crossmap(["a", "b", "c"].map(k)).unwrap();
        let m = to_matrix(&id);
        for (j, row) in m.values.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                assert_eq!(v.is_one(), j == c);
                assert_eq!(v.is_zero(), j != c);
            }
        }
        let country = to_matrix(&country());
        let probe_blx = ints(&[0, 1, 0, 0]);
        let column = matvec_dense(&country, &probe_blx).unwrap();
        assert_eq!(column, country.values[1]);
        assert!(matvec_dense(&country, &ints(&[0, 0, 0, 0]))
            .unwrap()
            .iter()
            .all(Rational::is_zero));
        assert_eq!(
            matvec_dense(&country, &ints(&[1])),
            Err(AlgebraError::DimensionMismatch {
                expected: 4,
                actual: 1
            })
        );
    }

    #[test]
    fn split_then_merge_collapses() {
        let split = map(&[("a", "m", 1, 2), ("a", "n", 1, 2)]);
        let merge = map(&[("m", "z", 1, 1), ("n", "z", 1, 1)]);
        assert_eq!(compose(&split, &merge).unwrap(), map(&[("a", "z", 1, 1)]));
    }

    #[test]
    fn identities_are_neutral_for_compose() {
        let x = country();
        let left = identity_crossmap(x.sources().iter().cloned()).unwrap();
        let right = identity_crossmap(x.targets().iter().cloned()).unwrap();
        assert_eq!(compose(&x, &right).unwrap(), x);
        assert_eq!(compose(&left, &x).unwrap(), x);
    }

    #[test]
    fn compose_reports_unmatched_keys() {
        let first = map(&[("a", "m", 1, 2), ("a", "n", 1, 2)]);
        let second = map(&[("m", "z", 1, 1)]);
        assert_eq!(
            compose(&first, &second),
            Err(AlgebraError::ChainCoverage {
                unmatched: vec![k("n")]
            })
        );
        assert_eq!(compose_all(&[]).unwrap_err().0, 0);
        assert_eq!(compose_all(&[first, second]).unwrap_err().0, 1);
    }

    #[test]
    fn reversal() {
        let id = identity_crossmap(["a", "b"].map(k)).unwrap();
        assert_eq!(reverse(&id).unwrap(), id);
        assert_eq!(
            reverse(&map(&[("a", "b", 1, 1)])).unwrap(),
            map(&[("b", "a", 1, 1)])
        );

        let aggregation = map(&[
            ("111311", "1111", 1, 1),
            ("111312", "1111", 1, 1),
            ("111399", "1111", 1, 1),
        ]);
        let report = reverse(&aggregation).unwrap_err();
        let finding = report.find(FindingCode::WeightSumNotOne, "1111").unwrap();
        assert_eq!(finding.sum, Some(Rational::integer(3)));
        assert!(finding
            .message
            .contains("3 outgoing links with weights of one"));
    }

    fn random_map(
        seed: u64,
        prefix_from: &str,
        from: usize,
        prefix_to: &str,
        to: usize,
    ) -> Crossmap {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for s in 0..from {
            let fanout = rng.gen_range(1..=to.min(3));
            let mut targets: Vec<usize> = (0..to).collect();
            for i in 0..fanout {
                let j = rng.gen_range(i..to);
                targets.swap(i, j);
            }
            let parts: Vec<i64> = (0..fanout).map(|_| rng.gen_range(1..6)).collect();
            let total: i64 = parts.iter().sum();
            for (t, p) in targets[..fanout].iter().zip(parts) {
                edges.push(Edge::new(
                    k(&format!("{prefix_from}{s}")),
                    k(&format!("{prefix_to}{t}")),
                    Rational::new(p, total),
                ));
            }
        }
        build_crossmap(&EdgeListDraft::new(edges)).unwrap()
    }

    proptest! {
        #[test]
        fn compose_is_associative_and_row_stochastic(seed in any::<u64>()) {
            let a = random_map(seed, "a", 5, "b", 4);
            let b = random_map(seed ^ 1, "b", 4, "c", 4);
            let c = random_map(seed ^ 2, "c", 4, "d", 3);
            let left = compose(&compose(&a, &b).unwrap(), &c).unwrap();
            let right = compose(&a, &compose(&b, &c).unwrap()).unwrap();
            prop_assert_eq!(&left, &right);
            prop_assert!(to_matrix(&left).row_sums().iter().all(Rational::is_one));
        }

        #[test]
        fn reverse_twice_is_identity_when_it_succeeds(seed in any::<u64>()) {
            let m = random_map(seed, "s", 4, "t", 4);
            if let Ok(rev) = reverse(&m) {
                prop_assert_eq!(reverse(&rev).unwrap(), m);
            }
        }

        #[test]
        fn renaming_reverses(perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
            let edges: EdgeListDraft = perm
                .iter()
                .enumerate()
                .map(|(i, j)| Edge::new(k(&format!("s{i}")), k(&format!("t{j}")), Rational::one()))
                .collect();
            let m = build_crossmap(&edges).unwrap();
            let rev = reverse(&m).unwrap();
            prop_assert_eq!(rev.sources(), m.targets());
            prop_assert_eq!(reverse(&rev).unwrap(), m);
        }
    }
}
