//! Multistart equilibrium search: sequential versus rayon execution.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use satbif::configuration::{ConfigDocument, RingSpec, ThreeBodySpec};
use satbif::equilibria::equilibria_of;
use satbif::Execution;

fn multistart(c: &mut Criterion) {
    let cases = [
        ("three_body", ConfigDocument::ThreeBody { three_body: ThreeBodySpec { mu: 0.3 }, alpha: 2.0 }),
        ("ring7", ConfigDocument::Ring { ring: RingSpec { n: 7, mu: 1.0 }, alpha: 2.0 }),
        ("ring12", ConfigDocument::Ring { ring: RingSpec { n: 12, mu: 1.0 }, alpha: 2.0 }),
    ];
    let mut group = c.benchmark_group("multistart");
    group.sample_size(10);
    for (name, doc) in cases {
        let built = doc.build().expect("valid builder");
        for exec in [Execution::Sequential, Execution::Parallel] {
            group.bench_with_input(BenchmarkId::new(format!("{exec:?}"), name), &built, |b, built| {
                b.iter(|| equilibria_of(black_box(built), exec).expect("search succeeds"))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, multistart);
criterion_main!(benches);
