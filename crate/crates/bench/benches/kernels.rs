use bipolar_bench::{config, densities, grid};
use bipolar_core::{RieszOperator, RieszParams};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn convolution(c: &mut Criterion) {
    let mut g = c.benchmark_group("conv");
    for cells in [16usize, 32, 64] {
        let cfg = config(cells);
        let op = RieszOperator::new(&grid(&cfg), RieszParams::new(cfg.physics.alpha, 2).unwrap()).unwrap();
        let (rho, _) = densities(&cfg);
        g.bench_with_input(BenchmarkId::new("fft", cells), &rho, |b, f| b.iter(|| op.conv_fft_periodic(black_box(f)).unwrap()));
        if cells <= 32 {
            g.bench_with_input(BenchmarkId::new("direct", cells), &rho, |b, f| b.iter(|| op.conv_direct(black_box(f)).unwrap()));
        }
    }
    g.finish();
}

fn gradient(c: &mut Criterion) {
    let mut g = c.benchmark_group("conv_grad");
    for cells in [32usize, 64, 128] {
        let cfg = config(cells);
        let op = RieszOperator::new(&grid(&cfg), RieszParams::new(cfg.physics.alpha, 2).unwrap()).unwrap();
        let (rho, _) = densities(&cfg);
        g.bench_with_input(BenchmarkId::from_parameter(cells), &rho, |b, f| b.iter(|| op.conv_grad(black_box(f)).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, convolution, gradient);
criterion_main!(benches);
