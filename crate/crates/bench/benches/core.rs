use std::hint::black_box;

use consensus_core::{
    compute_omega, fig2_topology, h_matrix, run, solve_q, BlockStructure, ScenarioConfig,
};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn gains(c: &mut Criterion) {
    let mut g = c.benchmark_group("solve_q");
    for q in [2, 4, 6] {
        let bs = BlockStructure::new(q, 3).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(q), &bs, |b, &bs| {
            b.iter(|| solve_q(black_box(bs)).unwrap())
        });
    }
    g.finish();
}

fn omega(c: &mut Criterion) {
    let h = h_matrix(&fig2_topology());
    c.bench_function("compute_omega/fig2", |b| {
        b.iter(|| compute_omega(black_box(&h)).unwrap())
    });
}

fn simulate(c: &mut Criterion) {
    let mut cfg = ScenarioConfig::chua_noisy();
    cfg.horizon = 0.5;
    let mut g = c.benchmark_group("simulate");
    g.sample_size(10);
    g.bench_function("chua_noisy/0.5s", |b| {
        b.iter(|| run(black_box(&cfg)).unwrap())
    });
    g.finish();
}

criterion_group!(benches, gains, omega, simulate);
criterion_main!(benches);
