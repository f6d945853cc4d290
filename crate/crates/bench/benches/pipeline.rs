//! Hot-path timings: tail-table assembly over the oscillatory potential,
//! gauge-series construction from a prebuilt table, and a single short mode
//! run.  Sample counts are kept small because one tail-table build already
//! integrates an oscillatory integrand over the whole grid.

use criterion::{criterion_group, criterion_main, Criterion};
use kglab_core::gauge::{build_gauge, StartTime};
use kglab_core::modes::{simulate_mode, ZoneConfig};
use kglab_core::potential::PotentialSpec;
use kglab_core::tails::{build_tail_table, TimeGrid};
use num_complex::Complex64;

fn tail_table(c: &mut Criterion) {
    let spec = PotentialSpec::oscillatory_example(0.5, 2.0).unwrap();
    let grid = TimeGrid::log_spaced(0.0, 100.0, 60).unwrap();
    c.bench_function("tail_table", |b| {
        b.iter(|| build_tail_table(&spec, &grid, 1e-8).unwrap())
    });
}

fn gauge_series(c: &mut Criterion) {
    let spec = PotentialSpec::oscillatory_example(0.5, 2.0).unwrap();
    let grid = TimeGrid::log_spaced(0.0, 100.0, 60).unwrap();
    let table = build_tail_table(&spec, &grid, 1e-8).unwrap();
    c.bench_function("gauge_series", |b| {
        b.iter(|| build_gauge(&spec, &table, &grid, 1e-7, 20, StartTime::Auto).unwrap())
    });
}

fn mode_run(c: &mut Criterion) {
    let spec = PotentialSpec::oscillatory_example(0.5, 2.0).unwrap();
    let grid = TimeGrid::log_spaced(0.0, 1e3, 120).unwrap();
    let table = build_tail_table(&spec, &grid, 1e-10).unwrap();
    let series = build_gauge(&spec, &table, &grid, 1e-8, 30, StartTime::Auto).unwrap();
    let zone = ZoneConfig::from_series(-2.0, &series).unwrap();
    let init = (Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    c.bench_function("mode_run", |b| {
        b.iter(|| simulate_mode(&spec, &series, &zone, 1.0, init, 20.0, 1e-8).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = tail_table, gauge_series, mode_run
}
criterion_main!(benches);
