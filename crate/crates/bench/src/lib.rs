//! Seeded generators for benchmark inputs.

use crossmap_core::{
    build_crossmap, Crossmap, Edge, EdgeListDraft, Key, Rational, SharedMassArray,
};
use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn keys(prefix: &str, n: usize) -> Vec<Key> {
    (0..n)
        .map(|i| Key::new(&format!("{prefix}{i:06}")).unwrap())
        .collect()
}

/// Random crossmap where each source links to between one and `max_fanout`
/// targets with positive integer-ratio weights.
pub fn random_crossmap<R: Rng>(
    rng: &mut R,
    sources: &[Key],
    targets: &[Key],
    max_fanout: usize,
) -> Crossmap {
    let mut edges = Vec::new();
    for s in sources {
        let fanout = rng.gen_range(1..=max_fanout.min(targets.len()).max(1));
        let picks = sample(rng, targets.len(), fanout);
        let parts: Vec<i64> = (0..fanout).map(|_| rng.gen_range(1..=9)).collect();
        let total: i64 = parts.iter().sum();
        for (t, p) in picks.iter().zip(parts) {
            edges.push(Edge::new(
                s.clone(),
                targets[t].clone(),
                Rational::new(p, total),
            ));
        }
    }
    build_crossmap(&EdgeListDraft::new(edges)).expect("generated weights sum to one")
}

pub fn random_array<R: Rng>(rng: &mut R, keys: &[Key]) -> SharedMassArray {
    SharedMassArray::from_entries(
        keys.iter()
            .map(|k| (k.clone(), Rational::integer(rng.gen_range(0..10_000)))),
    )
    .expect("keys are unique")
}
