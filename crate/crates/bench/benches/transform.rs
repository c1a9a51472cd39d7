use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use crossmap_bench::{keys, random_array, random_crossmap, rng};
use crossmap_core::{apply_transform, components, compose, TransformOptions};

fn bench_apply(c: &mut Criterion) {
    let mut group = c.benchmark_group("apply_transform");
    for n in [100usize, 1_000, 10_000] {
        let mut r = rng(7);
        let s = keys("s", n);
        let t = keys("t", n / 2 + 1);
        let map = random_crossmap(&mut r, &s, &t, 3);
        let x = random_array(&mut r, &s);
        let opts = TransformOptions::default();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| apply_transform(&map, &x, &opts).unwrap())
        });
    }
    group.finish();
}

fn bench_compose(c: &mut Criterion) {
    let mut group = c.benchmark_group("compose");
    for n in [100usize, 1_000, 10_000] {
        let mut r = rng(11);
        let a = keys("a", n);
        let b = keys("b", n);
        let cc = keys("c", n / 2 + 1);
        let first = random_crossmap(&mut r, &a, &b, 3);
        let second = random_crossmap(&mut r, &b, &cc, 3);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| compose(&first, &second).unwrap())
        });
    }
    group.finish();
}

fn bench_components(c: &mut Criterion) {
    let mut group = c.benchmark_group("components");
    for n in [100usize, 1_000, 10_000] {
        let mut r = rng(13);
        let map = random_crossmap(&mut r, &keys("s", n), &keys("t", n), 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| components(&map))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_apply, bench_compose, bench_components);
criterion_main!(benches);
