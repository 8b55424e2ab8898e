use std::hint::black_box;

use cac_core::alloc::{self, CallKind, CellState};
use cac_core::chain::{self, SchemeKind, SchemeSpec};
use cac_core::sim::{self, SimConfig};
use cac_core::SystemParams;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn busy_cell(params: &SystemParams) -> CellState {
    let mut state = CellState::empty(params);
    let classes = params.classes().len();
    for k in 0..400 {
        if let Some(next) = alloc::admit(&state, params, k % classes, CallKind::Handover).unwrap().new_state {
            state = next;
        }
    }
    state
}

fn allocation(c: &mut Criterion) {
    let p = SystemParams::reference(5885.0).unwrap();
    let state = busy_cell(&p);
    c.bench_function("reallocate_full_cell", |b| b.iter(|| alloc::reallocate(black_box(&state), &p).unwrap()));
    c.bench_function("admit_new_full_cell", |b| {
        b.iter(|| alloc::admit(black_box(&state), &p, 5, CallKind::New).unwrap())
    });
}

fn analysis(c: &mut Criterion) {
    let p = SystemParams::reference(5885.0).unwrap();
    let mut group = c.benchmark_group("solve_fixed_point");
    for kind in [SchemeKind::Proposed, SchemeKind::HardQosGuard] {
        group.bench_with_input(BenchmarkId::new(kind.label(), "0.5"), &kind, |b, &kind| {
            b.iter(|| chain::solve_fixed_point(black_box(0.5), &p, &SchemeSpec::new(kind)).unwrap())
        });
    }
    group.finish();
    c.bench_function("reference_sweep_all_schemes", |b| {
        b.iter(|| {
            for kind in SchemeKind::ALL {
                for k in 1..=20 {
                    black_box(chain::solve_fixed_point(0.05 * k as f64, &p, &SchemeSpec::new(kind)).unwrap());
                }
            }
        })
    });
}

fn simulation(c: &mut Criterion) {
    let p = SystemParams::reference(588.5).unwrap();
    let mut cfg = SimConfig::new(0.1, 5_000.0, 1);
    cfg.replications = 1;
    let mut group = c.benchmark_group("simulate_5000s");
    group.sample_size(10);
    for kind in [SchemeKind::Proposed, SchemeKind::HardQos] {
        group.bench_with_input(BenchmarkId::from_parameter(kind.label()), &kind, |b, &kind| {
            b.iter(|| sim::run(&p, &SchemeSpec::new(kind), &cfg).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, allocation, analysis, simulation);
criterion_main!(benches);
