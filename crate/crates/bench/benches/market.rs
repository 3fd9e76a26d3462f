use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use tatmarket_bench::{linear, mixed};
use tatmarket_core::equilibrium::{solve_equilibrium, DEFAULT_TOL};
use tatmarket_core::theory::epsilon_apriori_linear;
use tatmarket_core::{run, tat_step};

fn demand(c: &mut Criterion) {
    let f = mixed(1000, 4);
    c.bench_function("spending/mixed-1000x4", |b| {
        b.iter(|| black_box(f.market.spending(black_box(&f.p0))))
    });
}

fn step(c: &mut Criterion) {
    let mut group = c.benchmark_group("tat_step");
    for buyers in [100, 1000] {
        let f = linear(buyers, 4);
        group.bench_with_input(BenchmarkId::new("linear", buyers), &f, |b, f| {
            b.iter(|| tat_step(&f.market, &f.p0, &f.config).unwrap())
        });
    }
    group.finish();
}

fn full_run(c: &mut Criterion) {
    let f = linear(1000, 4);
    let config = f.config.clone().with_max_iters(100).with_stop_tol(0.0);
    c.bench_function("run/linear-1000x4-100", |b| {
        b.iter(|| run(&f.market, &f.p0, &config).unwrap())
    });
}

fn equilibrium(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_equilibrium");
    group.sample_size(10);
    for goods in [2, 4] {
        let f = mixed(50, goods);
        group.bench_with_input(BenchmarkId::new("mixed-50", goods), &f, |b, f| {
            b.iter(|| solve_equilibrium(&f.market, DEFAULT_TOL).unwrap())
        });
    }
    group.finish();
}

fn epsilon(c: &mut Criterion) {
    let f = linear(200, 3);
    c.bench_function("epsilon_apriori/linear-200x3-grid17", |b| {
        b.iter(|| epsilon_apriori_linear(&f.market, 0.1, 17).unwrap())
    });
}

criterion_group!(benches, demand, step, full_run, equilibrium, epsilon);
criterion_main!(benches);
