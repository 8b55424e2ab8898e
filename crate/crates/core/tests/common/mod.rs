//! Scenarios and oracles shared by the integration tests.
#![allow(dead_code)]

use cac_core::alloc::{self, AdmissionPolicy, CallKind, CellState};
use cac_core::chain::{self, SchemeKind, SchemeSpec};
use cac_core::sim::{self, SimConfig};
use cac_core::{SystemParams, TrafficClass, BANDWIDTH_EPS};

pub const REFERENCE_CAPACITY: f64 = 5885.0;
pub const SMALL_CAPACITY: f64 = 588.5;

pub fn reference() -> SystemParams {
    SystemParams::reference(REFERENCE_CAPACITY).unwrap()
}

pub fn small() -> SystemParams {
    SystemParams::reference(SMALL_CAPACITY).unwrap()
}

/// 20 evenly spaced loads from 0.05 to 1.0 calls/s.
pub fn reference_sweep() -> Vec<f64> {
    (1..=20).map(|k| 0.05 * k as f64).collect()
}

/// One real-time 25 kbit/s class sized to exactly `n` channels.
pub fn single_realtime(n: usize) -> SystemParams {
    let voice = TrafficClass {
        name: "voice".into(),
        realtime: true,
        requested_kbps: 25.0,
        gamma_new: 0.0,
        gamma_handover: 0.0,
        mix: 1.0,
        duration_mean_s: 120.0,
    };
    SystemParams::new(25.0 * n as f64 + 0.5, vec![voice], 240.0).unwrap()
}

/// Erlang-B by the forward recurrence B(k) = a B(k-1) / (k + a B(k-1)).
pub fn erlang_b(servers: usize, load: f64) -> f64 {
    (1..=servers).fold(1.0, |b, k| load * b / (k as f64 + load * b))
}

/// Offered new-call rate that makes the total offered load equal `load`
/// once handovers are balanced, in a pure loss system with `servers` channels.
pub fn new_rate_for_total_load(servers: usize, load: f64, release_rate: f64, p_handover: f64) -> f64 {
    let b = erlang_b(servers, load);
    let h = p_handover * (1.0 - b) / (1.0 - p_handover * (1.0 - b));
    load * release_rate / (1.0 + h)
}

/// A reachable cell state: replays `ops` as (class, is_handover, release)
/// steps from the empty cell, skipping impossible releases.
pub fn replay(params: &SystemParams, ops: &[(usize, bool, bool)]) -> CellState {
    let mut state = CellState::empty(params);
    let classes = params.classes().len();
    for &(m, handover, release) in ops {
        let m = m % classes;
        if release {
            if state.counts()[m] > 0 {
                state = state.release(params, m).unwrap();
            }
            continue;
        }
        let kind = if handover { CallKind::Handover } else { CallKind::New };
        if let Some(next) = alloc::admit(&state, params, m, kind).unwrap().new_state {
            state = next;
        }
    }
    state
}

pub type Check = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// Every allocation stays within its class bounds without oversubscribing
/// the cell. When any adaptive call is below its request the cell is full.
pub fn check_conservation(state: &CellState, params: &SystemParams) -> Check {
    state.check_invariants(params).map_err(|e| e.to_string())?;
    let occ = alloc::occupied(state);
    let degraded = params
        .classes()
        .iter()
        .enumerate()
        .any(|(m, c)| state.counts()[m] > 0 && state.alloc()[m] < c.requested_kbps - 1e-9);
    ensure(!degraded || (occ - params.capacity_kbps()).abs() <= 1e-6, || {
        format!("degraded cell occupies {occ} of {}", params.capacity_kbps())
    })
}

/// An accepted new call leaves every adaptive call at or above its
/// new-call floor; an accepted handover at or above its handover floor.
pub fn check_floor_safety(state: &CellState, params: &SystemParams, m: usize, kind: CallKind) -> Check {
    let out = alloc::admit(state, params, m, kind).map_err(|e| e.to_string())?;
    let Some(next) = out.new_state else { return Ok(()) };
    for (k, c) in params.classes().iter().enumerate() {
        if c.realtime || next.counts()[k] == 0 {
            continue;
        }
        let lv = c.levels();
        let floor = if kind == CallKind::New { lv.new_floor_kbps } else { lv.handover_floor_kbps };
        ensure(next.alloc()[k] >= floor - BANDWIDTH_EPS, || {
            format!("{kind:?} admit of class {m} leaves {} at {} < {floor}", c.name, next.alloc()[k])
        })?;
    }
    check_conservation(&next, params)
}

pub fn check_idempotence(state: &CellState, params: &SystemParams) -> Check {
    let once = alloc::reallocate(state, params).map_err(|e| e.to_string())?;
    let twice = alloc::reallocate(&once, params).map_err(|e| e.to_string())?;
    ensure(once == twice && once == *state, || format!("reallocation moved {state:?} to {once:?}"))
}

/// A handover is never refused where a new call of the same class is taken.
pub fn check_priority_dominance(state: &CellState, params: &SystemParams, policy: &AdmissionPolicy, m: usize) -> Check {
    let new = alloc::admit_with(state, params, policy, m, CallKind::New).map_err(|e| e.to_string())?;
    let ho = alloc::admit_with(state, params, policy, m, CallKind::Handover).map_err(|e| e.to_string())?;
    ensure(!new.is_accepted() || ho.is_accepted(), || {
        format!("class {m} new call accepted but handover rejected in {state:?}")
    })
}

pub fn check_normalization(lambda_n: f64, lambda_h: f64, params: &SystemParams, scheme: &SchemeSpec) -> Check {
    let pi = chain::stationary_distribution(lambda_n, lambda_h, params, scheme).map_err(|e| e.to_string())?;
    let total: f64 = pi.iter().sum();
    ensure((total - 1.0).abs() <= 1e-12 && pi.iter().all(|p| *p >= 0.0), || {
        format!("{scheme:?} at ({lambda_n}, {lambda_h}) sums to {total}")
    })
}

pub fn check_fixed_point_residual(lambda_n: f64, params: &SystemParams, scheme: &SchemeSpec) -> Check {
    let sol = chain::solve_fixed_point(lambda_n, params, scheme).map_err(|e| e.to_string())?;
    let implied = chain::handover_balance(lambda_n, sol.handover_probability, sol.p_block, sol.p_drop);
    let residual = (implied - sol.lambda_h).abs();
    ensure(residual <= 1e-8 * lambda_n, || format!("{:?} at {lambda_n}: residual {residual}", scheme.kind))
}

pub fn short_sim(lambda_n: f64, seed: u64) -> SimConfig {
    let mut cfg = SimConfig::new(lambda_n, 3_000.0, seed);
    cfg.replications = 2;
    cfg
}

pub fn check_work_conservation(params: &SystemParams, kind: SchemeKind, lambda_n: f64, seed: u64) -> Check {
    let report = sim::run(params, &SchemeSpec::new(kind), &short_sim(lambda_n, seed)).map_err(|e| e.to_string())?;
    ensure(report.max_work_error <= 1e-6, || format!("delivered volume off by {}", report.max_work_error))
}

pub fn check_seed_determinism(params: &SystemParams, kind: SchemeKind, lambda_n: f64, seed: u64) -> Check {
    let scheme = SchemeSpec::new(kind);
    let cfg = short_sim(lambda_n, seed);
    let mut trace_a = Vec::new();
    let mut trace_b = Vec::new();
    let a = sim::run_traced(params, &scheme, &cfg, &mut trace_a).map_err(|e| e.to_string())?;
    let b = sim::run_traced(params, &scheme, &cfg, &mut trace_b).map_err(|e| e.to_string())?;
    ensure(a == b && trace_a == trace_b, || format!("{kind:?} seed {seed} is not reproducible"))
}

/// Per-class blocking of a multi-rate loss system with integer bandwidths
/// (Kaufman-Roberts recursion). `loads[m]` is in erlangs.
pub fn kaufman_roberts(capacity: usize, bandwidths: &[usize], loads: &[f64]) -> Vec<f64> {
    let mut q = vec![0.0; capacity + 1];
    q[0] = 1.0;
    for j in 1..=capacity {
        q[j] =
            bandwidths.iter().zip(loads).filter(|(b, _)| **b <= j).map(|(b, a)| a * *b as f64 * q[j - b]).sum::<f64>()
                / j as f64;
    }
    let total: f64 = q.iter().sum();
    bandwidths.iter().map(|b| q[capacity + 1 - b..].iter().sum::<f64>() / total).collect()
}

/// `(P_B, P_D)` of a hard-QoS cell treated exactly as a multi-rate loss
/// system, with one balanced handover stream per class. Bandwidths must be
/// whole kbit/s.
pub fn multirate_hard_qos(params: &SystemParams, lambda_n: f64) -> (f64, f64) {
    let classes = params.classes();
    let bandwidths: Vec<usize> = classes.iter().map(|c| c.requested_kbps as usize).collect();
    let capacity = params.capacity_kbps().floor() as usize;
    let release: Vec<f64> = classes.iter().map(|c| params.dwell_rate() + 1.0 / c.duration_mean_s).collect();
    let ph: Vec<f64> = classes.iter().zip(&release).map(|(_, mu)| params.dwell_rate() / mu).collect();
    let mut handover: Vec<f64> = classes.iter().zip(&ph).map(|(c, p)| lambda_n * c.mix * p / (1.0 - p)).collect();
    let mut blocking = vec![0.0; classes.len()];
    for _ in 0..2000 {
        let loads: Vec<f64> =
            (0..classes.len()).map(|m| (lambda_n * classes[m].mix + handover[m]) / release[m]).collect();
        blocking = kaufman_roberts(capacity, &bandwidths, &loads);
        handover = (0..classes.len())
            .map(|m| {
                let b = blocking[m];
                lambda_n * classes[m].mix * ph[m] * (1.0 - b) / (1.0 - ph[m] * (1.0 - b))
            })
            .collect();
    }
    let p_block = classes.iter().zip(&blocking).map(|(c, b)| c.mix * b).sum();
    let p_drop = handover.iter().zip(&blocking).map(|(h, b)| h * b).sum::<f64>() / handover.iter().sum::<f64>();
    (p_block, p_drop)
}
