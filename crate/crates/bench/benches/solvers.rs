use bipolar_bench::{config, densities, euler_state, grid, limit_solver};
use bipolar_core::EulerRiesz;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn euler_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("euler_step");
    for cells in [32usize, 64] {
        let cfg = config(cells);
        let solver = EulerRiesz::new(&grid(&cfg), cfg.solver_config(0.05).unwrap()).unwrap();
        let state = euler_state(&cfg);
        let dt = solver.stable_dt(&state);
        g.bench_with_input(BenchmarkId::from_parameter(cells), &state, |b, s| b.iter(|| solver.step(black_box(s), dt).unwrap()));
    }
    g.finish();
}

fn limit_step(c: &mut Criterion) {
    let mut g = c.benchmark_group("limit_step");
    for cells in [32usize, 64, 128] {
        let cfg = config(cells);
        let solver = limit_solver(&cfg);
        let (rho, n) = densities(&cfg);
        let dt = solver.stable_dt(&rho, &n).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(cells), &(rho, n), |b, (r, n)| {
            b.iter(|| solver.step(black_box(r), black_box(n), dt).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, euler_step, limit_step);
criterion_main!(benches);
