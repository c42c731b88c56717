use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use domi_bench::random_kernel;
use domi_core::dpp::{greedy_map, sample_kdpp_with};
use domi_core::{sample_dpp, sym_eig};

fn eigendecomposition(c: &mut Criterion) {
    let mut group = c.benchmark_group("sym_eig");
    for n in [16, 61, 157] {
        let k = random_kernel(n, 128, 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &k, |b, k| {
            b.iter(|| sym_eig(black_box(k)).unwrap())
        });
    }
    group.finish();
}

fn kdpp(c: &mut Criterion) {
    let mut group = c.benchmark_group("kdpp_draw");
    for (n, k) in [(61, 5), (157, 115)] {
        let eig = random_kernel(n, 160, 2).psd_eig().unwrap();
        let mut seed = 0u64;
        group.bench_function(BenchmarkId::new(format!("n{n}"), k), |b| {
            b.iter(|| {
                seed += 1;
                sample_kdpp_with(black_box(&eig), k, seed).unwrap()
            })
        });
    }
    group.finish();
}

fn exact_dpp(c: &mut Criterion) {
    let k = random_kernel(61, 32, 3);
    let mut seed = 0u64;
    c.bench_function("exact_dpp_n61", |b| {
        b.iter(|| {
            seed += 1;
            sample_dpp(black_box(&k), seed).unwrap()
        })
    });
}

fn map(c: &mut Criterion) {
    let mut group = c.benchmark_group("greedy_map");
    for (n, k) in [(61, 5), (157, 115)] {
        let kernel = random_kernel(n, 160, 4);
        group.bench_function(BenchmarkId::new(format!("n{n}"), k), |b| {
            b.iter(|| greedy_map(black_box(&kernel), k).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, eigendecomposition, kdpp, exact_dpp, map);
criterion_main!(benches);
