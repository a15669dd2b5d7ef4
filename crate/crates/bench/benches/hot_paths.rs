//! Benchmarks for the paths the simulator leans on: closed-form queue
//! sojourns, tree hop lookups, full placement planning, and a short
//! end-to-end run.

use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ripple_core::*;

fn queueing(c: &mut Criterion) {
    c.bench_function("sojourn_formulas", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for lambda in [100.0, 500.0, 900.0] {
                acc += mm1_sojourn(black_box(lambda), black_box(1000.0));
                acc += md1_sojourn(black_box(lambda), black_box(1000.0));
            }
            acc
        })
    });
}

fn hop_paths(c: &mut Criterion) {
    let sc = Scenario::default();
    let m = sc.materialize().unwrap();
    let stations = m.net.base_stations().to_vec();
    c.bench_function("hop_distance_all_station_pairs", |b| {
        b.iter(|| {
            let mut total = 0u32;
            for &a in &stations {
                for &z in &stations {
                    total += m.net.hop_distance(black_box(a), black_box(z));
                }
            }
            total
        })
    });
}

/// One full planning pass on the 16-station tree: 4 users, 4-VNF chains,
/// three likely stations per user.
fn planning(c: &mut Criterion) {
    let sc = Scenario::default();
    let m = sc.materialize().unwrap();
    let users: BTreeMap<UserId, SfcTypeId> = m.users.iter().map(|u| (u.id, u.sfc)).collect();
    let forecasts: BTreeMap<UserId, Forecast> = m
        .users
        .iter()
        .enumerate()
        .map(|(i, u)| {
            // Three likely stations per user, certain no-connect elsewhere.
            let mut no_connect: BTreeMap<NodeId, f64> = m
                .net
                .base_stations()
                .iter()
                .map(|&b| (b, 1.0))
                .collect();
            for (offset, nc) in [(0, 0.2), (4, 0.5), (8, 0.9)] {
                no_connect.insert(NodeId((i + offset) as u32), nc);
            }
            (
                u.id,
                Forecast {
                    user: u.id,
                    horizon_h: 12.63,
                    no_connect,
                    predicted_positions: Vec::new(),
                },
            )
        })
        .collect();
    let thresholds = LifecycleThresholds::default();
    let current = BTreeMap::new();
    let ctx = PlanningContext {
        net: &m.net,
        sfcs: &m.sfcs,
        users: &users,
        current: &current,
        thresholds: &thresholds,
        table: &m.table,
        requirement: VNF_REQUIREMENT,
        delay: &sc.delay,
    };
    c.bench_function("ripple_plan_tree_16", |b| {
        b.iter(|| ripple_plan(black_box(&ctx), black_box(&forecasts)).unwrap())
    });
}

fn short_run(c: &mut Criterion) {
    let sc = Scenario {
        duration: 10.0,
        ..Scenario::default()
    };
    c.bench_function("engine_run_10s_tree_16", |b| {
        b.iter(|| run(black_box(&sc), black_box(3)).unwrap())
    });
}

criterion_group!(benches, queueing, hop_paths, planning, short_run);
criterion_main!(benches);
