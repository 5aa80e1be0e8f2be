use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use needlet_core::field::synthesize_replication;
use needlet_core::stats::{estimated_variances, theoretical_variances};
use needlet_core::{beta_exact, evaluate_grid, beta_discrete, NeedletScale, PowerSpectrum};

fn coefficients(c: &mut Criterion) {
    let spec = PowerSpectrum::power_law(4.0).unwrap();
    let mut group = c.benchmark_group("beta_exact");
    for j in [6u32, 8, 10] {
        let scale = NeedletScale::new(j).unwrap();
        let field = synthesize_replication(&spec, scale.l_max(), 1, 0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(scale.n()), &field, |b, f| {
            b.iter(|| beta_exact(black_box(f), &scale).unwrap())
        });
    }
    group.finish();

    let scale = NeedletScale::new(8).unwrap();
    let field = synthesize_replication(&spec, 4 * 4 * scale.n(), 1, 0).unwrap();
    c.bench_function("beta_discrete_grid_4n", |b| {
        b.iter(|| {
            let grid = evaluate_grid(black_box(&field), 4 * scale.n()).unwrap();
            beta_discrete(&grid, &scale).unwrap()
        })
    });
}

fn variances(c: &mut Criterion) {
    let spec = PowerSpectrum::power_law(4.0).unwrap();
    let mut group = c.benchmark_group("variances");
    for j in [6u32, 8, 10] {
        let scale = NeedletScale::new(j).unwrap();
        group.bench_with_input(BenchmarkId::new("theoretical", scale.n()), &scale, |b, s| {
            b.iter(|| theoretical_variances(&spec, black_box(s)).unwrap())
        });
        let field = synthesize_replication(&spec, scale.l_max(), 2, 0).unwrap();
        let coeffs = beta_exact(&field, &scale).unwrap();
        group.bench_with_input(BenchmarkId::new("estimated", scale.n()), &coeffs, |b, c| {
            b.iter(|| estimated_variances(black_box(&c.weighted_power), &c.scale).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, coefficients, variances);
criterion_main!(benches);
