use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use sail_core::prompting::select_icl_examples;
use sail_core::synthetic::{SyntheticSpec, SyntheticWorld};
use sail_core::IclExample;

fn world(n: usize, dim: usize) -> SyntheticWorld {
    SyntheticWorld::generate(SyntheticSpec {
        dim,
        ..SyntheticSpec::new("de-fr".parse().unwrap(), n, 0)
    })
    .unwrap()
}

fn nearest_neighbors(c: &mut Criterion) {
    let mut group = c.benchmark_group("nearest_neighbors");
    for n in [5_000, 50_000] {
        let w = world(n, 300);
        let space = &w.x.space;
        let candidates: Vec<&str> = space.words().iter().map(String::as_str).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| space.nearest_neighbors(black_box("dew0042"), candidates.iter().copied(), 5))
        });
    }
    group.finish();
}

fn icl_examples(c: &mut Criterion) {
    let w = world(20_000, 300);
    // a dictionary the size of a full-scale harvest
    let store: Vec<IclExample> = w
        .lexicon
        .iter()
        .step_by(2)
        .take(5_000)
        .map(|(x, y)| IclExample::new(x.clone(), y.clone()))
        .collect();
    c.bench_function("select_icl_examples/5000", |b| {
        b.iter(|| select_icl_examples(&store, &w.x.space, black_box("dew0777"), 5).unwrap())
    });
}

criterion_group!(benches, nearest_neighbors, icl_examples);
criterion_main!(benches);
