//! Birth-death performance model of a cell under the five admission schemes.
//!
//! States count calls. Up to `N` calls everybody runs at full bandwidth and
//! releases channels at the base rate; the `S` extra states exist only
//! because adaptive calls are degraded, which also slows their release.
//! New calls are admitted below the cutoff state (`N + L`, or `N - G` for
//! the guard-channel baseline); handovers are admitted below the top state.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alloc::{self, AdmissionPolicy, AllocError, NewCallRejectRule};
use crate::model::{self, ModelError, SystemParams};

/// Iteration cap of the handover-rate fixed point.
pub const MAX_FIXED_POINT_ITERATIONS: usize = 10_000;
/// Relative step size at which the fixed point is declared converged.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-9;

// Ratios that are integers in exact arithmetic (e.g. 5885 / 58.85) can land a few ulps
// below the integer in floating point.
const FLOOR_NUDGE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error("degenerate scenario: capacity {capacity_kbps} kbit/s holds no average call ({mean_kbps} kbit/s)")]
    Degenerate { capacity_kbps: f64, mean_kbps: f64 },
    #[error("{name} must be {constraint}, got {value}")]
    InvalidRate { name: &'static str, constraint: &'static str, value: f64 },
    #[error("state {index} outside the chain (0..={max})")]
    StateIndex { index: usize, max: usize },
    #[error("numerical failure in the stationary distribution: {0}")]
    Numerical(String),
    #[error(
        "handover-rate fixed point did not converge after {iterations} iterations \
         (last lambda_h = {last_lambda_h}, residual = {residual})"
    )]
    Convergence { iterations: usize, last_lambda_h: f64, residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// Prioritized adaptive allocation with separate new/handover floors.
    Proposed,
    /// Adaptive allocation with the new-call floor equal to the handover floor.
    NonPrioritizedAdaptive,
    /// Adaptive allocation that never degrades anyone for a new call.
    AqosHandoverPriority,
    /// No degradation, no reservation.
    HardQos,
    /// No degradation, a fraction of the channels reserved for handovers.
    HardQosGuard,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 5] = [
        SchemeKind::Proposed,
        SchemeKind::NonPrioritizedAdaptive,
        SchemeKind::AqosHandoverPriority,
        SchemeKind::HardQos,
        SchemeKind::HardQosGuard,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SchemeKind::Proposed => "proposed",
            SchemeKind::NonPrioritizedAdaptive => "non_prioritized_adaptive",
            SchemeKind::AqosHandoverPriority => "aqos_handover_priority",
            SchemeKind::HardQos => "hard_qos",
            SchemeKind::HardQosGuard => "hard_qos_guard",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.label() == label)
    }

    pub fn is_adaptive(self) -> bool {
        matches!(self, SchemeKind::Proposed | SchemeKind::NonPrioritizedAdaptive | SchemeKind::AqosHandoverPriority)
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeSpec {
    pub kind: SchemeKind,
    /// Share of the base channels reserved for handovers (guard scheme only).
    pub guard_fraction: f64,
}

impl SchemeSpec {
    pub const DEFAULT_GUARD_FRACTION: f64 = 0.05;

    pub fn new(kind: SchemeKind) -> Self {
        Self { kind, guard_fraction: Self::DEFAULT_GUARD_FRACTION }
    }

    /// The scenario as this scheme sees it: every baseline is the proposed
    /// scheme with its degradation factors rewritten.
    pub fn effective_params(&self, params: &SystemParams) -> Result<SystemParams, ModelError> {
        match self.kind {
            SchemeKind::Proposed => Ok(params.clone()),
            SchemeKind::NonPrioritizedAdaptive => params.with_gammas(|c| (c.gamma_handover, c.gamma_handover)),
            SchemeKind::AqosHandoverPriority => params.with_gammas(|c| (0.0, c.gamma_handover)),
            SchemeKind::HardQos | SchemeKind::HardQosGuard => params.with_gammas(|_| (0.0, 0.0)),
        }
    }

    /// Guard channels reserved by this scheme for a base capacity of `n_base`.
    pub fn guard_channels(&self, n_base: usize) -> usize {
        if self.kind != SchemeKind::HardQosGuard {
            return 0;
        }
        let g = (self.guard_fraction * n_base as f64 - FLOOR_NUDGE).ceil().max(0.0) as usize;
        g.min(n_base)
    }

    pub fn topology(&self, params: &SystemParams) -> Result<ChainTopology, ChainError> {
        let eff = self.effective_params(params)?;
        let n_base = base_capacity_n(&eff);
        if n_base == 0 {
            return Err(ChainError::Degenerate {
                capacity_kbps: eff.capacity_kbps(),
                mean_kbps: eff.mean_requested_kbps(),
            });
        }
        Ok(ChainTopology {
            n_base,
            s_extra: extra_states_s(&eff)?,
            l_newcall: newcall_states_l(&eff)?,
            guard_channels: self.guard_channels(n_base),
        })
    }

    /// Admission policy that realizes this scheme in the live allocator; the
    /// guard channels become guard bandwidth of one average call each.
    pub fn admission_policy(&self, params: &SystemParams, rule: NewCallRejectRule) -> AdmissionPolicy {
        let n_base = base_capacity_n(params);
        AdmissionPolicy {
            new_call_reject: rule,
            guard_kbps: self.guard_channels(n_base) as f64 * params.mean_requested_kbps(),
        }
    }
}

/// Shape of the chain for one scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainTopology {
    pub n_base: usize,
    pub s_extra: usize,
    pub l_newcall: usize,
    pub guard_channels: usize,
}

impl ChainTopology {
    /// Highest state; handovers are dropped there.
    pub fn top_state(&self) -> usize {
        self.n_base + self.s_extra
    }

    /// First state in which new calls are blocked.
    pub fn new_call_cutoff(&self) -> usize {
        if self.guard_channels > 0 {
            self.n_base - self.guard_channels
        } else {
            self.n_base + self.l_newcall
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSolution {
    pub scheme: SchemeSpec,
    pub topology: ChainTopology,
    /// Stationary probabilities of states `0..=top_state`.
    pub pi: Vec<f64>,
    pub p_block: f64,
    pub p_drop: f64,
    pub lambda_n: f64,
    pub lambda_h: f64,
    pub handover_probability: f64,
    pub iterations: usize,
}

fn nudged_floor(x: f64) -> usize {
    (x + FLOOR_NUDGE * x.abs().max(1.0)).floor().max(0.0) as usize
}

/// Calls that fit when everybody gets the full request.
pub fn base_capacity_n(params: &SystemParams) -> usize {
    nudged_floor(params.capacity_kbps() / params.mean_requested_kbps())
}

fn extra_states(params: &SystemParams, gamma: impl Fn(&model::TrafficClass) -> f64) -> Result<usize, ChainError> {
    let reclaimable: f64 = params.classes().iter().map(|c| c.mix * gamma(c) * c.requested_kbps).sum();
    let kept: f64 = params.classes().iter().map(|c| c.mix * (1.0 - gamma(c)) * c.requested_kbps).sum();
    if !(kept > 0.0) {
        return Err(ModelError::InvalidParams(vec!["degradation factors leave no bandwidth per call".into()]).into());
    }
    Ok(nudged_floor(params.capacity_kbps() * reclaimable / (kept * params.mean_requested_kbps())))
}

/// Extra calls that fit once every adaptive call is at its handover floor.
pub fn extra_states_s(params: &SystemParams) -> Result<usize, ChainError> {
    extra_states(params, |c| c.gamma_handover)
}

/// Extra calls that fit once every adaptive call is at its new-call floor.
pub fn newcall_states_l(params: &SystemParams) -> Result<usize, ChainError> {
    extra_states(params, |c| c.gamma_new)
}

/// Per-call release rate in state `i`.
///
/// Above the base capacity the census is taken as `mix * i` calls per class,
/// allocated like a live cell, and adaptive durations are stretched by
/// `requested / allocated` (the call's data volume is fixed).
pub fn state_release_rate(i: usize, params: &SystemParams) -> Result<f64, ChainError> {
    let n_base = base_capacity_n(params);
    let top = n_base + extra_states_s(params)?;
    if i > top {
        return Err(ChainError::StateIndex { index: i, max: top });
    }
    if i <= n_base {
        return Ok(model::base_release_rate(params));
    }
    let census: Vec<f64> = params.classes().iter().map(|c| c.mix * i as f64).collect();
    let alloc = alloc::allocate(&census, params)?;
    let mean_duration: f64 = params
        .classes()
        .iter()
        .zip(&alloc)
        .map(|(c, &a)| {
            let stretch = if c.realtime { 1.0 } else { c.requested_kbps / a };
            c.mix * c.duration_mean_s * stretch
        })
        .sum();
    Ok(params.dwell_rate() + 1.0 / mean_duration)
}

/// Stationary law of a finite birth-death chain.
///
/// `births[i]` is the rate from `i` to `i + 1`, `deaths[i]` the total rate
/// from `i + 1` to `i`. Weights are accumulated in the log domain so that
/// neither factorials nor large powers are ever formed.
pub fn birth_death_distribution(births: &[f64], deaths: &[f64]) -> Result<Vec<f64>, ChainError> {
    if births.len() != deaths.len() {
        return Err(ChainError::Numerical(format!("{} birth rates but {} death rates", births.len(), deaths.len())));
    }
    let mut log_w = Vec::with_capacity(births.len() + 1);
    log_w.push(0.0f64);
    for (k, (&b, &d)) in births.iter().zip(deaths).enumerate() {
        if !(b >= 0.0) || !(d > 0.0) || !b.is_finite() || !d.is_finite() {
            return Err(ChainError::Numerical(format!("transition {k}: birth {b}, death {d}")));
        }
        let prev = log_w[k];
        log_w.push(prev + b.ln() - d.ln());
    }
    let peak = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut pi: Vec<f64> = log_w.iter().map(|&l| (l - peak).exp()).collect();
    let total: f64 = pi.iter().sum();
    if !(total.is_finite() && total >= 1.0) {
        return Err(ChainError::Numerical(format!("normalizer {total} (peak log-weight {peak})")));
    }
    for p in &mut pi {
        *p /= total;
    }
    Ok(pi)
}

/// Per-call release rates `mu_1..=mu_top` for a topology (index 0 unused).
pub fn release_rates(params: &SystemParams, topology: &ChainTopology) -> Result<Vec<f64>, ChainError> {
    let base = model::base_release_rate(params);
    let mut rates = vec![base; topology.top_state() + 1];
    for (i, rate) in rates.iter_mut().enumerate().skip(topology.n_base + 1) {
        *rate = state_release_rate(i, params)?;
    }
    Ok(rates)
}

fn check_rates(lambda_n: f64, lambda_h: f64) -> Result<(), ChainError> {
    if !(lambda_n > 0.0 && lambda_n.is_finite()) {
        return Err(ChainError::InvalidRate { name: "lambda_n", constraint: "positive", value: lambda_n });
    }
    if !(lambda_h >= 0.0 && lambda_h.is_finite()) {
        return Err(ChainError::InvalidRate { name: "lambda_h", constraint: "non-negative", value: lambda_h });
    }
    Ok(())
}

struct PreparedChain {
    topology: ChainTopology,
    rates: Vec<f64>,
}

impl PreparedChain {
    fn new(params: &SystemParams, scheme: &SchemeSpec) -> Result<Self, ChainError> {
        let topology = scheme.topology(params)?;
        let eff = scheme.effective_params(params)?;
        let rates = release_rates(&eff, &topology)?;
        Ok(Self { topology, rates })
    }

    fn distribution(&self, lambda_n: f64, lambda_h: f64) -> Result<Vec<f64>, ChainError> {
        let cutoff = self.topology.new_call_cutoff();
        let top = self.topology.top_state();
        let births: Vec<f64> = (0..top).map(|i| if i < cutoff { lambda_n + lambda_h } else { lambda_h }).collect();
        let deaths: Vec<f64> = (1..=top).map(|i| i as f64 * self.rates[i]).collect();
        birth_death_distribution(&births, &deaths)
    }
}

pub fn stationary_distribution(
    lambda_n: f64,
    lambda_h: f64,
    params: &SystemParams,
    scheme: &SchemeSpec,
) -> Result<Vec<f64>, ChainError> {
    check_rates(lambda_n, lambda_h)?;
    PreparedChain::new(params, scheme)?.distribution(lambda_n, lambda_h)
}

/// `(P_B, P_D)`: new calls are blocked from the cutoff state upwards,
/// handovers only in the top state.
pub fn blocking_dropping(pi: &[f64], topology: &ChainTopology) -> (f64, f64) {
    let top = topology.top_state();
    let p_block = pi[topology.new_call_cutoff()..=top].iter().sum();
    (p_block, pi[top])
}

/// Handover arrivals implied by a given loss pair.
pub fn handover_balance(lambda_n: f64, p_handover: f64, p_block: f64, p_drop: f64) -> f64 {
    lambda_n * p_handover * (1.0 - p_block) / (1.0 - p_handover * (1.0 - p_drop))
}

/// Solves for the handover arrival rate that balances handovers into and out
/// of the cell, and returns the chain at that rate.
pub fn solve_fixed_point(
    lambda_n: f64,
    params: &SystemParams,
    scheme: &SchemeSpec,
) -> Result<ChainSolution, ChainError> {
    check_rates(lambda_n, 0.0)?;
    let chain = PreparedChain::new(params, scheme)?;
    let p_handover = model::handover_probability(params.dwell_mean_s(), params.mean_full_duration_s())?;

    let mut lambda_h = lambda_n * p_handover / (1.0 - p_handover);
    let mut damping = 1.0;
    let mut last_step: Option<f64> = None;
    let mut residual = f64::INFINITY;
    for iteration in 1..=MAX_FIXED_POINT_ITERATIONS {
        let pi = chain.distribution(lambda_n, lambda_h)?;
        let (p_block, p_drop) = blocking_dropping(&pi, &chain.topology);
        let step = handover_balance(lambda_n, p_handover, p_block, p_drop) - lambda_h;
        residual = step.abs();
        if residual <= FIXED_POINT_TOLERANCE * lambda_n.max(lambda_h) {
            // report the chain at the updated rate, not the one before the step
            let lambda_h = (lambda_h + damping * step).max(0.0);
            let pi = chain.distribution(lambda_n, lambda_h)?;
            let (p_block, p_drop) = blocking_dropping(&pi, &chain.topology);
            return Ok(ChainSolution {
                scheme: *scheme,
                topology: chain.topology,
                pi,
                p_block,
                p_drop,
                lambda_n,
                lambda_h,
                handover_probability: p_handover,
                iterations: iteration,
            });
        }
        if let Some(prev) = last_step {
            if prev * step < 0.0 && step.abs() > 0.5 * prev.abs() {
                damping = 0.5;
            }
        }
        last_step = Some(step);
        lambda_h = (lambda_h + damping * step).max(0.0);
    }
    Err(ChainError::Convergence { iterations: MAX_FIXED_POINT_ITERATIONS, last_lambda_h: lambda_h, residual })
}
