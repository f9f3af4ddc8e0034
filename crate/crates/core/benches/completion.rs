//! Parallel vs sequential completion. With the `parallel` feature the same
//! workload runs on the global rayon pool and inside a one-thread pool;
//! `cargo bench --no-default-features` measures the plain-iterator build.

use circuit_completion::rank1::faccro_all;
use circuit_completion::rankr::{vmclosure_all, ClosureConfig, WeightingMode};
use circuit_completion::simgen::{draw, NoiseKind, SimConfig, SimDraw};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn sample(n: usize, rank: usize) -> SimDraw {
    draw(&SimConfig {
        rows: n,
        cols: n,
        rank,
        observe_prob: 0.6,
        noise_level: 0.0,
        noise_kind: NoiseKind::Multiplicative,
        seed: 1,
    })
    .unwrap()
}

fn build() -> &'static str {
    if circuit_completion::par::is_parallel() {
        "rayon"
    } else {
        "sequential"
    }
}

fn bench_faccro(c: &mut Criterion) {
    let mut group = c.benchmark_group("faccro_all");
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    for n in [50, 100] {
        let d = sample(n, 1);
        group.bench_with_input(BenchmarkId::new(build(), n), &d, |b, d| {
            b.iter(|| faccro_all(black_box(&d.observed)).unwrap())
        });
        if circuit_completion::par::is_parallel() {
            group.bench_with_input(BenchmarkId::new("rayon-1-thread", n), &d, |b, d| {
                b.iter(|| single.install(|| faccro_all(black_box(&d.observed)).unwrap()))
            });
        }
    }
    group.finish();
}

fn bench_vmclosure(c: &mut Criterion) {
    let mut group = c.benchmark_group("vmclosure_all");
    group.sample_size(10);
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let d = sample(40, 2);
    let cfg = ClosureConfig::new(2, WeightingMode::Multiplicative);
    group.bench_function(BenchmarkId::new(build(), 40), |b| {
        b.iter(|| vmclosure_all(black_box(&d.observed), &cfg).unwrap())
    });
    if circuit_completion::par::is_parallel() {
        group.bench_function(BenchmarkId::new("rayon-1-thread", 40), |b| {
            b.iter(|| single.install(|| vmclosure_all(black_box(&d.observed), &cfg).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, bench_faccro, bench_vmclosure);
criterion_main!(benches);
