//! Sequential versus parallel execution of the data-parallel loops.
//!
//! Both policies produce identical output; only the wall time differs.
//! Build with `--no-default-features` to see the pure sequential fallback.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gravkernel::gravity::{generate_dataset, SampleParams};
use gravkernel::kernels::{
    input_lift, mc_kernel_estimate_with, Activation, DotProductKernel, McSpec,
};
use gravkernel::regression::{gram, FeatureMap};
use gravkernel::Exec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const POLICIES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn points(n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    (0..n)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            input_lift(&v, true).unwrap()
        })
        .collect()
}

fn bench_gram(c: &mut Criterion) {
    let x = points(400, 8);
    let kernel = DotProductKernel::modified_relu();
    let mut group = c.benchmark_group("gram_400");
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| gram(&kernel, black_box(&x), exec).unwrap())
        });
    }
    group.finish();
}

fn bench_monte_carlo(c: &mut Criterion) {
    let x = points(2, 8);
    let spec = McSpec::new(Activation::Relu, 100_000, 1.0, 5);
    let mut group = c.benchmark_group("mc_kernel_1e5");
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| mc_kernel_estimate_with(&x[0], &x[1], black_box(&spec), exec).unwrap())
        });
    }
    group.finish();
}

fn bench_features(c: &mut Criterion) {
    let x = points(2000, 20);
    let map = FeatureMap::sample(21, 500, Activation::Relu, 1.0, None, 1).unwrap();
    let mut group = c.benchmark_group("features_2000x500");
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| map.features(black_box(&x), exec).unwrap())
        });
    }
    group.finish();
}

fn bench_dataset(c: &mut Criterion) {
    let params = SampleParams::default();
    let mut group = c.benchmark_group("dataset_k20_5000");
    for (name, exec) in POLICIES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| generate_dataset(20, 5000, black_box(3), &params, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_gram, bench_monte_carlo, bench_features, bench_dataset
}
criterion_main!(benches);
