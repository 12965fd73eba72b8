use std::hint::black_box;

use berhu::loss::huber_concomitant;
use berhu::penalty::adaptive_berhu_concomitant;
use berhu::tuning::zero_log_grid;
use berhu::{fit, fit_path, Loss, RngStream, SolverConfig};
use berhu_bench::{berhu_spec, block_data};
use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DVector;
use rand::Rng;

fn bench_fit(c: &mut Criterion) {
    let cfg = SolverConfig::default();
    let mut g = c.benchmark_group("fit");
    for (name, model, loss) in [
        ("ls-ad-berhu/model1/n100", 1, Loss::LeastSquares),
        ("huber-ad-berhu/model2/n100", 2, Loss::Huber { m: 1.345 }),
    ] {
        let data = block_data(model, 100, 11);
        let spec = berhu_spec(&data, loss, 20.0);
        g.bench_function(name, |b| b.iter(|| fit(black_box(&data), &spec, &cfg).unwrap()));
    }
    g.finish();
}

fn bench_scans(c: &mut Criterion) {
    let mut rng = RngStream::new(5, 0);
    let beta = DVector::from_fn(40, |_, _| rng.random_range(-3.0..3.0));
    let weights = DVector::from_fn(40, |_, _| rng.random_range(0.1..5.0));
    c.bench_function("tau-scan/p40", |b| {
        b.iter(|| adaptive_berhu_concomitant(black_box(&beta), &weights, 1.345).unwrap())
    });
    let r: Vec<f64> = (0..400).map(|_| rng.random_range(-10.0..10.0)).collect();
    c.bench_function("scale-scan/n400", |b| {
        b.iter(|| huber_concomitant(black_box(&r), 1.345).unwrap())
    });
}

fn bench_path(c: &mut Criterion) {
    let data = block_data(1, 100, 13);
    let spec = berhu_spec(&data, Loss::LeastSquares, 0.0);
    let grid: Vec<f64> = zero_log_grid(100, 1400.0).unwrap().into_iter().rev().collect();
    let cfg = SolverConfig::default();
    let mut g = c.benchmark_group("path");
    g.sample_size(10);
    g.bench_function("ls-ad-berhu/100-point-grid", |b| {
        b.iter(|| fit_path(black_box(&data), &spec, &grid, &cfg))
    });
    g.finish();
}

criterion_group!(benches, bench_fit, bench_scans, bench_path);
criterion_main!(benches);
