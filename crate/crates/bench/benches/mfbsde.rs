use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use meanrefl_core::{simulate_brownian, solve_backward, solve_backward_with, BackwardBasis, GeneratorKind, TimeGrid};

fn bench_backward(c: &mut Criterion) {
    let grid = TimeGrid::new(1.0, 100).unwrap();
    let np = 10_000;
    let ens = simulate_brownian(grid, 1, np, 11).unwrap();
    let xi: Vec<f64> = (0..np).map(|i| 1.0 + ens.terminal(i)[0]).collect();
    let gen = GeneratorKind::Affine { c0: 0.0, a_y: 0.1, a_mu: 1.0, a_z: 0.2, a_nu: 0.0 }.build(1).unwrap();

    let mut group = c.benchmark_group("solve_mfbsde");
    group.sample_size(10);
    group.bench_function("simulate_brownian/N=1e4,n=100", |b| {
        b.iter(|| simulate_brownian(grid, 1, black_box(np), 11).unwrap())
    });
    group.bench_function("with_basis_build/N=1e4,n=100", |b| {
        b.iter(|| solve_backward(&ens, &gen, black_box(&xi), 4).unwrap())
    });
    let basis = BackwardBasis::new(&ens, 4).unwrap();
    group.bench_function("cached_basis/N=1e4,n=100", |b| {
        b.iter(|| solve_backward_with(&ens, &basis, &gen, black_box(&xi)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bench_backward);
criterion_main!(benches);
