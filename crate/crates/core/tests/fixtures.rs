use std::collections::BTreeMap;
use std::fs::File;
use std::path::PathBuf;

use crossmap_core::graph::type_counts;
use crossmap_core::io::{
    import_crosswalk, read_array, read_crossmap, read_crosswalk, read_key_list, SplitPolicy,
};
use crossmap_core::{
    apply_transform, components, summarize, Crossmap, Key, MassValue, Rational, RelationType,
    SharedMassArray, TransformOptions,
};
use proptest::prelude::*;

fn fixture(name: &str) -> File {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name);
    File::open(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn map(name: &str) -> Crossmap {
    read_crossmap(fixture(name)).unwrap().unwrap()
}

#[test]
fn decimal_and_fraction_country_files_agree() {
    assert_eq!(map("country.csv"), map("country_decimal.csv"));
}

#[test]
fn country_observations_are_redistributed() {
    let x = read_array(fixture("country_obs.csv")).unwrap();
    let (y, receipt) =
        apply_transform(&map("country.csv"), &x, &TransformOptions::default()).unwrap();
    let got: BTreeMap<&str, String> = y.iter().map(|(k, v)| (k.as_str(), v.to_string())).collect();
    let want: BTreeMap<&str, String> = [("AUS", "140"), ("BEL", "5"), ("DEU", "7"), ("LUX", "5")]
        .into_iter()
        .map(|(k, v)| (k, v.to_string()))
        .collect();
    assert_eq!(got, want);
    assert_eq!(receipt.input_total, Rational::integer(157));
    assert_eq!(receipt.output_total, Rational::integer(157));
}

#[test]
fn isco_has_three_components() {
    let kinds: Vec<_> = components(&map("isco.csv"))
        .iter()
        .map(|c| c.relation_type)
        .collect();
    assert_eq!(kinds.len(), 3);
    assert!(kinds.contains(&RelationType::ManyToMany));
    assert!(kinds.contains(&RelationType::OneToOne));
    assert!(kinds.contains(&RelationType::ManyToOne));
}

#[test]
fn stata_occupation_summary() {
    let m = map("stata_occupation.csv");
    assert_eq!(m.edges().len(), 329);
    assert!(m.edges().iter().all(|e| e.weight.is_one()));
    let summary = summarize(&m);
    let counts: Vec<(&str, usize)> = summary
        .targets
        .iter()
        .map(|t| (t.target.as_str(), t.incoming_count))
        .collect();
    assert_eq!(
        counts,
        [
            ("assprofclerk", 87),
            ("craftrademach", 70),
            ("professional", 57),
            ("svcsales", 36),
            ("manager", 32),
            ("farmer", 17),
            ("teacher", 10),
            ("driver", 7),
            ("labourer", 6),
            ("armforces", 4),
            ("notclass", 2),
            ("xefe", 1),
        ]
    );
    let comps = components(&m);
    let counts = type_counts(&comps);
    assert_eq!(counts.get(&RelationType::ManyToOne), Some(&11));
    assert_eq!(counts.get(&RelationType::OneToOne), Some(&1));
    let keys = read_key_list(std::io::BufReader::new(fixture(
        "stata_occupation_keys.txt",
    )))
    .unwrap();
    assert_eq!(keys.len(), 329);
    assert_eq!(keys.as_slice(), m.sources());
}

#[test]
fn iso_crosswalk_is_one_to_one() {
    let cw = read_crosswalk(fixture("iso_crosswalk.csv")).unwrap();
    let imported = import_crosswalk(&cw, SplitPolicy::RejectSplits).unwrap();
    assert!(imported.crossmap.edges().iter().all(|e| e.weight.is_one()));
    assert!(components(&imported.crossmap)
        .iter()
        .all(|c| c.relation_type == RelationType::OneToOne));
}

#[test]
fn country_crosswalk_needs_equal_split() {
    let cw = read_crosswalk(fixture("country_crosswalk.csv")).unwrap();
    assert!(import_crosswalk(&cw, SplitPolicy::RejectSplits).is_err());
    let imported = import_crosswalk(&cw, SplitPolicy::EqualSplit).unwrap();
    assert_eq!(imported.crossmap, map("country.csv"));
}

/// Dense reference: y_t = sum over sources s of x_s * C[s][t], computed by
/// scanning every (source, target) pair of a full matrix.
fn dense_oracle(m: &Crossmap, x: &SharedMassArray) -> BTreeMap<Key, Rational> {
    let mut matrix = vec![vec![Rational::zero(); m.targets().len()]; m.sources().len()];
    for e in m.edges() {
        let i = m.sources().iter().position(|s| *s == e.from).unwrap();
        let j = m.targets().iter().position(|t| *t == e.to).unwrap();
        matrix[i][j] = e.weight.clone();
    }
    let mut y = BTreeMap::new();
    for (j, t) in m.targets().iter().enumerate() {
        let mut acc = Rational::zero();
        for (i, s) in m.sources().iter().enumerate() {
            let xs = match x.get(s.as_str()) {
                Some(MassValue::Known(v)) => v.clone(),
                _ => Rational::zero(),
            };
            acc += xs * &matrix[i][j];
        }
        y.insert(t.clone(), acc);
    }
    y
}

fn arb_map_and_array() -> impl Strategy<Value = (Crossmap, SharedMassArray)> {
    (1usize..10, 1usize..10)
        .prop_flat_map(|(ns, nt)| {
            let rows = prop::collection::vec(prop::collection::vec(0u32..4, nt), ns);
            let xs = prop::collection::vec(0i64..1000, ns);
            (rows, xs, Just(nt))
        })
        .prop_map(|(rows, xs, nt)| {
            let mut text = String::from("from,to,weight\n");
            for (i, row) in rows.iter().enumerate() {
                let mut row = row.clone();
                if row.iter().all(|&w| w == 0) {
                    row[i % nt] = 1;
                }
                let total: u32 = row.iter().sum();
                for (j, &w) in row.iter().enumerate() {
                    if w > 0 {
                        text.push_str(&format!("s{i},t{j},{w}/{total}\n"));
                    }
                }
            }
            let m = read_crossmap(text.as_bytes()).unwrap().unwrap();
            let x = SharedMassArray::from_entries(
                xs.iter()
                    .enumerate()
                    .map(|(i, v)| (Key::new(&format!("s{i}")).unwrap(), Rational::integer(*v))),
            )
            .unwrap();
            (m, x)
        })
}

proptest! {
    #[test]
    fn sparse_apply_matches_dense_oracle((m, x) in arb_map_and_array()) {
        let (y, receipt) = apply_transform(&m, &x, &TransformOptions::default()).unwrap();
        let got: BTreeMap<Key, Rational> = y.iter().map(|(k, v)| (k.clone(), v.known().unwrap().clone())).collect();
        prop_assert_eq!(got, dense_oracle(&m, &x));
        prop_assert_eq!(receipt.input_total, receipt.output_total);
    }
}
