use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rwre_bench::{fixture, SEED};
use rwre_core::exactdist::{hitting_time_law, position_pmf, running_max_direct};
use rwre_core::mcsim::{simulate_hitting_time, DEFAULT_STEP_CAP};
use rwre_core::QuenchedMomentTable;
use std::hint::black_box;

const SIZES: [u64; 3] = [256, 1024, 4096];

fn moment_table(c: &mut Criterion) {
    let mut g = c.benchmark_group("moment_table");
    for n in SIZES {
        let p = fixture(n).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| {
            b.iter(|| QuenchedMomentTable::build(black_box(&p.env), p.trunc_left).unwrap())
        });
    }
    g.finish();
}

fn hitting_law(c: &mut Criterion) {
    let mut g = c.benchmark_group("hitting_time_law");
    g.sample_size(10);
    for n in SIZES {
        let p = fixture(n).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| {
            b.iter(|| hitting_time_law(&p.env, &p.table, black_box(n as i64), 1e-9).unwrap())
        });
    }
    g.finish();
}

fn position_law(c: &mut Criterion) {
    let mut g = c.benchmark_group("position_pmf");
    g.sample_size(10);
    for n in SIZES {
        let p = fixture(n).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| {
            b.iter(|| position_pmf(&p.env, black_box(n), p.trunc_left).unwrap())
        });
    }
    g.finish();
}

fn running_max(c: &mut Criterion) {
    let mut g = c.benchmark_group("running_max_direct");
    g.sample_size(10);
    for n in [256, 1024] {
        let p = fixture(n).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &p, |b, p| {
            b.iter(|| running_max_direct(&p.env, black_box(n), p.trunc_left).unwrap())
        });
    }
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let mut g = c.benchmark_group("simulate_hitting_time");
    g.sample_size(10);
    let p = fixture(1024).unwrap();
    for k in [64i64, 256] {
        g.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| simulate_hitting_time(&p.env, k, 1000, SEED, DEFAULT_STEP_CAP).unwrap())
        });
    }
    g.finish();
}

criterion_group!(
    benches,
    moment_table,
    hitting_law,
    position_law,
    running_max,
    simulation
);
criterion_main!(benches);
