use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use tailgarch::{
    fractile_schedule, iterate_volatility, trim_indicators, ErrorDist, Estimator, FitConfig,
    GarchParams, TrimMode,
};
use tailgarch_bench::sample;

fn volatility(c: &mut Criterion) {
    let theta = GarchParams::new(0.05, 0.05, 0.90).unwrap();
    let mut group = c.benchmark_group("iterate_volatility");
    for n in [100, 800, 5000] {
        let y = sample(n, &ErrorDist::pareto(2.5), 1);
        group.bench_with_input(BenchmarkId::from_parameter(n), &y, |b, y| {
            b.iter(|| iterate_volatility(&theta, black_box(y)).unwrap())
        });
    }
    group.finish();
}

fn trimming(c: &mut Criterion) {
    let mut group = c.benchmark_group("trim_indicators");
    for n in [100, 800, 5000] {
        let y = sample(n, &ErrorDist::pareto(2.5), 2);
        let centered: Vec<f64> = y.iter().map(|v| v * v / 0.5 - 1.0).collect();
        let plan = fractile_schedule(n, 0.025, TrimMode::StrongAsym).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &centered, |b, e| {
            b.iter(|| trim_indicators(black_box(e), &plan).unwrap())
        });
    }
    group.finish();
}

fn fits(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit");
    group.sample_size(20);
    for n in [100, 800] {
        let y = sample(n, &ErrorDist::pareto(2.5), 3);
        let cfg = FitConfig::for_sample(n).unwrap();
        for e in [Estimator::Qmttl, Estimator::Qml, Estimator::Mnwm] {
            group.bench_with_input(BenchmarkId::new(e.name(), n), &y, |b, y| {
                b.iter(|| e.fit(black_box(y), &cfg).unwrap())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, volatility, trimming, fits);
criterion_main!(benches);
