//! Bandwidth allocation engine and the admit/reject decision.
//!
//! Allocation is a pure function of the census: real-time calls always get
//! their request; adaptive calls get their request while the residual
//! capacity covers it, and otherwise share the residual in proportion to
//! their handover floors, capped at the request (water-filling).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{SystemParams, TrafficClass};
use crate::BANDWIDTH_EPS;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocError {
    #[error("class index {index} out of range ({classes} classes)")]
    ClassIndex { index: usize, classes: usize },
    #[error("residual adaptive capacity is undefined without active adaptive calls")]
    UndefinedResidual,
    #[error("census needs {needed_kbps} kbit/s at its floors but capacity is {capacity_kbps} kbit/s")]
    Infeasible { needed_kbps: f64, capacity_kbps: f64 },
    #[error("census has {got} classes, scenario has {expected}")]
    Shape { got: usize, expected: usize },
    #[error("cell state invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CallKind {
    New,
    Handover,
}

impl CallKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CallKind::New => "new",
            CallKind::Handover => "handover",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    Accepted,
    Rejected,
}

/// Which classes the "already at the new-call floor" rule inspects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewCallRejectRule {
    /// Reject every new call while any degraded adaptive class sits at or
    /// below its new-call floor.
    #[default]
    AnyDegradedClass,
    /// Only look at the arriving call's own class.
    ArrivingClass,
}

/// Knobs of the admission decision that are not part of the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AdmissionPolicy {
    pub new_call_reject: NewCallRejectRule,
    /// Bandwidth that new calls may never use (guard band), kbit/s.
    pub guard_kbps: f64,
}

/// Live census of a cell: calls per class and their current per-call
/// allocation. `alloc[m]` only means something while `counts[m] > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellState {
    counts: Vec<u32>,
    alloc: Vec<f64>,
}

impl CellState {
    pub fn empty(params: &SystemParams) -> Self {
        Self {
            counts: vec![0; params.classes().len()],
            alloc: params.classes().iter().map(|c| c.requested_kbps).collect(),
        }
    }

    /// Builds the census and runs the allocation on it.
    pub fn with_counts(params: &SystemParams, counts: Vec<u32>) -> Result<Self, AllocError> {
        if counts.len() != params.classes().len() {
            return Err(AllocError::Shape { got: counts.len(), expected: params.classes().len() });
        }
        let state = Self { counts, alloc: Vec::new() };
        reallocate(&state, params)
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn alloc(&self) -> &[f64] {
        &self.alloc
    }

    pub fn total_calls(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Removes one call of class `class_index` and recomputes allocations.
    pub fn release(&self, params: &SystemParams, class_index: usize) -> Result<Self, AllocError> {
        check_index(params, class_index)?;
        if self.counts[class_index] == 0 {
            return Err(AllocError::Invariant(format!("no active call of class {class_index} to release")));
        }
        let mut next = self.clone();
        next.counts[class_index] -= 1;
        reallocate(&next, params)
    }

    /// Checks per-class bounds and that the cell is not oversubscribed.
    pub fn check_invariants(&self, params: &SystemParams) -> Result<(), AllocError> {
        for (m, class) in params.classes().iter().enumerate() {
            if self.counts[m] == 0 {
                continue;
            }
            let a = self.alloc[m];
            if class.realtime && a != class.requested_kbps {
                return Err(AllocError::Invariant(format!("real-time class {} allocated {a}", class.name)));
            }
            let floor = class.levels().handover_floor_kbps;
            if a < floor - BANDWIDTH_EPS || a > class.requested_kbps + BANDWIDTH_EPS {
                return Err(AllocError::Invariant(format!(
                    "class {} allocated {a} outside [{floor}, {}]",
                    class.name, class.requested_kbps
                )));
            }
        }
        let occ = occupied(self);
        if occ > params.capacity_kbps() + BANDWIDTH_EPS {
            return Err(AllocError::Invariant(format!("occupied {occ} exceeds capacity {}", params.capacity_kbps())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmitOutcome {
    pub decision: Decision,
    /// Census after admission and reallocation; `None` when rejected.
    pub new_state: Option<CellState>,
    /// Per-call bandwidth granted to the arriving call, kbit/s (0 when rejected).
    pub granted_kbps: f64,
}

impl AdmitOutcome {
    fn rejected() -> Self {
        Self { decision: Decision::Rejected, new_state: None, granted_kbps: 0.0 }
    }

    pub fn is_accepted(&self) -> bool {
        self.decision == Decision::Accepted
    }
}

fn check_index(params: &SystemParams, index: usize) -> Result<(), AllocError> {
    let classes = params.classes().len();
    if index < classes {
        Ok(())
    } else {
        Err(AllocError::ClassIndex { index, classes })
    }
}

fn floor_for(class: &TrafficClass, kind: CallKind) -> f64 {
    let lv = class.levels();
    match kind {
        CallKind::New => lv.new_floor_kbps,
        CallKind::Handover => lv.handover_floor_kbps,
    }
}

fn realtime_demand(counts: &[f64], params: &SystemParams) -> f64 {
    params.classes().iter().zip(counts).filter(|(c, _)| c.realtime).map(|(c, n)| n * c.requested_kbps).sum()
}

/// Residual fractional adaptive capacity: what real-time calls leave over,
/// relative to the full request of the adaptive calls.
pub fn residual_fraction(state: &CellState, params: &SystemParams) -> Result<f64, AllocError> {
    let counts: Vec<f64> = state.counts.iter().map(|&n| f64::from(n)).collect();
    residual_fraction_of(&counts, params)
}

fn residual_fraction_of(counts: &[f64], params: &SystemParams) -> Result<f64, AllocError> {
    let adaptive: f64 =
        params.classes().iter().zip(counts).filter(|(c, _)| !c.realtime).map(|(c, n)| n * c.requested_kbps).sum();
    if adaptive <= 0.0 {
        return Err(AllocError::UndefinedResidual);
    }
    Ok((params.capacity_kbps() - realtime_demand(counts, params)) / adaptive)
}

/// Per-class per-call allocation for a (possibly fractional) census.
///
/// Classes with no calls are reported at their request.
pub fn allocate(counts: &[f64], params: &SystemParams) -> Result<Vec<f64>, AllocError> {
    let classes = params.classes();
    if counts.len() != classes.len() {
        return Err(AllocError::Shape { got: counts.len(), expected: classes.len() });
    }
    let mut alloc: Vec<f64> = classes.iter().map(|c| c.requested_kbps).collect();
    let x = match residual_fraction_of(counts, params) {
        Ok(x) => x,
        Err(AllocError::UndefinedResidual) => {
            let rt = realtime_demand(counts, params);
            if rt > params.capacity_kbps() + BANDWIDTH_EPS {
                return Err(AllocError::Infeasible { needed_kbps: rt, capacity_kbps: params.capacity_kbps() });
            }
            return Ok(alloc);
        }
        Err(e) => return Err(e),
    };
    if x >= 1.0 {
        return Ok(alloc);
    }

    let mut residual = params.capacity_kbps() - realtime_demand(counts, params);
    let at_floors: f64 =
        classes.iter().zip(counts).filter(|(c, _)| !c.realtime).map(|(c, n)| n * c.levels().handover_floor_kbps).sum();
    if residual < at_floors - BANDWIDTH_EPS {
        return Err(AllocError::Infeasible {
            needed_kbps: params.capacity_kbps() - residual + at_floors,
            capacity_kbps: params.capacity_kbps(),
        });
    }

    let mut uncapped: Vec<usize> = (0..classes.len()).filter(|&m| !classes[m].realtime && counts[m] > 0.0).collect();
    loop {
        let weight: f64 = uncapped.iter().map(|&m| counts[m] * classes[m].levels().handover_floor_kbps).sum();
        let factor = residual / weight;
        let (capped, rest): (Vec<usize>, Vec<usize>) = uncapped
            .iter()
            .partition(|&&m| factor * classes[m].levels().handover_floor_kbps >= classes[m].requested_kbps);
        if capped.is_empty() {
            for &m in &rest {
                alloc[m] = factor * classes[m].levels().handover_floor_kbps;
            }
            return Ok(alloc);
        }
        for &m in &capped {
            residual -= counts[m] * classes[m].requested_kbps;
        }
        uncapped = rest;
        if uncapped.is_empty() {
            // x < 1 guarantees some class stays uncapped; only rounding lands here.
            return Ok(alloc);
        }
    }
}

/// Recomputes every allocation from the census.
pub fn reallocate(state: &CellState, params: &SystemParams) -> Result<CellState, AllocError> {
    let counts: Vec<f64> = state.counts.iter().map(|&n| f64::from(n)).collect();
    let alloc = allocate(&counts, params)?;
    Ok(CellState { counts: state.counts.clone(), alloc })
}

/// Bandwidth the adaptive calls could give up before hitting the floor for
/// `kind`. Classes already below that floor contribute nothing.
pub fn releasable(state: &CellState, params: &SystemParams, kind: CallKind) -> f64 {
    params
        .classes()
        .iter()
        .enumerate()
        .filter(|(m, c)| !c.realtime && state.counts[*m] > 0)
        .map(|(m, c)| f64::from(state.counts[m]) * (state.alloc[m] - floor_for(c, kind)).max(0.0))
        .sum()
}

pub fn occupied(state: &CellState) -> f64 {
    state.counts.iter().zip(&state.alloc).map(|(&n, &a)| if n > 0 { f64::from(n) * a } else { 0.0 }).sum()
}

/// Capacity left if every adaptive call dropped to the floor for `kind`.
/// Negative when calls already sit below the new-call floor.
pub fn available(state: &CellState, params: &SystemParams, kind: CallKind) -> f64 {
    let held: f64 = params
        .classes()
        .iter()
        .zip(&state.counts)
        .map(|(c, &n)| f64::from(n) * if c.realtime { c.requested_kbps } else { floor_for(c, kind) })
        .sum();
    params.capacity_kbps() - held
}

/// Smallest allocation the arriving call may start with.
pub fn required(class: &TrafficClass, kind: CallKind) -> f64 {
    if class.realtime {
        class.requested_kbps
    } else {
        floor_for(class, kind)
    }
}

fn new_calls_frozen(state: &CellState, params: &SystemParams, rule: NewCallRejectRule, arriving: usize) -> bool {
    let at_floor = |m: usize| {
        let c = &params.classes()[m];
        !c.realtime
            && state.counts[m] > 0
            && state.alloc[m] < c.requested_kbps - BANDWIDTH_EPS
            && state.alloc[m] <= c.levels().new_floor_kbps + BANDWIDTH_EPS
    };
    match rule {
        NewCallRejectRule::AnyDegradedClass => (0..params.classes().len()).any(at_floor),
        NewCallRejectRule::ArrivingClass => at_floor(arriving),
    }
}

/// Admission with the default policy (no guard band, global reject rule).
pub fn admit(
    state: &CellState,
    params: &SystemParams,
    class_index: usize,
    kind: CallKind,
) -> Result<AdmitOutcome, AllocError> {
    admit_with(state, params, &AdmissionPolicy::default(), class_index, kind)
}

/// The full admission flow:
///
/// 1. a new call is turned away while adaptive calls are already degraded
///    to their new-call floor;
/// 2. a call whose request fits in the idle capacity is taken at full rate;
/// 3. otherwise the call is taken if its minimum fits in what the adaptive
///    calls can release, and the cell is re-allocated. A new call must leave
///    every adaptive class at or above its new-call floor.
///
/// New calls never touch `policy.guard_kbps`.
pub fn admit_with(
    state: &CellState,
    params: &SystemParams,
    policy: &AdmissionPolicy,
    class_index: usize,
    kind: CallKind,
) -> Result<AdmitOutcome, AllocError> {
    check_index(params, class_index)?;
    let class = &params.classes()[class_index];
    if kind == CallKind::New && new_calls_frozen(state, params, policy.new_call_reject, class_index) {
        return Ok(AdmitOutcome::rejected());
    }
    let guard = if kind == CallKind::New { policy.guard_kbps } else { 0.0 };

    let mut grown = state.clone();
    grown.counts[class_index] += 1;

    let idle = params.capacity_kbps() - occupied(state) - guard;
    if class.requested_kbps <= idle + BANDWIDTH_EPS {
        let next = reallocate(&grown, params)?;
        let granted_kbps = next.alloc[class_index];
        return Ok(AdmitOutcome { decision: Decision::Accepted, new_state: Some(next), granted_kbps });
    }

    if required(class, kind) > available(state, params, kind) - guard + BANDWIDTH_EPS {
        return Ok(AdmitOutcome::rejected());
    }
    let next = reallocate(&grown, params)?;
    let floors_hold = params
        .classes()
        .iter()
        .enumerate()
        .filter(|(m, c)| !c.realtime && next.counts[*m] > 0)
        .all(|(m, c)| next.alloc[m] >= floor_for(c, kind) - BANDWIDTH_EPS);
    if !floors_hold {
        return Ok(AdmitOutcome::rejected());
    }
    let granted_kbps = next.alloc[class_index];
    Ok(AdmitOutcome { decision: Decision::Accepted, new_state: Some(next), granted_kbps })
}
