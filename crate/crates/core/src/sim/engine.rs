//! Event loop of one replication.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::{SimConfig, SimError};
use crate::alloc::{self, AdmissionPolicy, CallKind, CellState};
use crate::chain::SchemeSpec;
use crate::model::SystemParams;

/// Slack on an adaptive call's remaining data volume, kbit.
const WORK_TOLERANCE_KBIT: f64 = 1e-6;

/// Raw counters of one replication, all restricted to the observation window.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReplicationStats {
    pub offered_new: u64,
    pub blocked_new: u64,
    pub handover_attempts: u64,
    pub dropped_handover: u64,
    /// Integral of occupied / capacity over the observation window.
    pub busy_integral: f64,
    pub observed_s: f64,
    /// Calls admitted inside the window that also ended inside it.
    pub tracked_finished: u64,
    pub tracked_dropped: u64,
    pub tracked_with_handover: u64,
    pub completed_adaptive: u64,
    pub max_work_error: f64,
    pub events: u64,
}

/// What is left of a call's service.
#[derive(Debug, Clone, Copy)]
enum Service {
    /// Remaining holding time of a real-time call, seconds.
    Holding(f64),
    /// Remaining and total data volume of an adaptive call, kbit.
    Data { remaining: f64, total: f64, delivered: f64 },
}

#[derive(Debug, Clone)]
struct Call {
    class: usize,
    service: Service,
    /// Absolute end of the current stay in the cell.
    dwell_end: f64,
    tracked: bool,
    handed_over: bool,
}

/// A call parked in the neighbouring cell.
#[derive(Debug)]
struct Transit {
    back_at: f64,
    seq: u64,
    call: Call,
}

impl PartialEq for Transit {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Transit {}
impl PartialOrd for Transit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Transit {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other.back_at.total_cmp(&self.back_at).then(other.seq.cmp(&self.seq))
    }
}

/// Kinds of event, in the order they are served at equal times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    Completion,
    Departure,
    HandoverArrival,
    NewArrival,
}

impl EventKind {
    fn label(self) -> &'static str {
        match self {
            EventKind::Completion => "completion",
            EventKind::Departure => "departure",
            EventKind::HandoverArrival => "handover_arrival",
            EventKind::NewArrival => "new_arrival",
        }
    }
}

pub(super) struct Setup {
    params: SystemParams,
    policy: AdmissionPolicy,
    cfg: SimConfig,
    transit_mean_s: f64,
}

impl Setup {
    pub(super) fn new(params: &SystemParams, scheme: &SchemeSpec, cfg: &SimConfig) -> Result<Self, SimError> {
        let eff = scheme.effective_params(params).map_err(crate::chain::ChainError::from)?;
        let policy = scheme.admission_policy(&eff, cfg.new_call_reject);
        Ok(Self {
            transit_mean_s: cfg.transit_mean_s.unwrap_or(eff.dwell_mean_s()),
            params: eff,
            policy,
            cfg: cfg.clone(),
        })
    }

    pub(super) fn replicate(&self, r: u32, trace: Option<&mut dyn Write>) -> Result<ReplicationStats, SimError> {
        Replication::new(self, r, trace)?.run()
    }
}

struct Replication<'a, 'w> {
    setup: &'a Setup,
    rng: ChaCha8Rng,
    class_pick: WeightedIndex<f64>,
    interarrival: Exp<f64>,
    dwell: Exp<f64>,
    transit: Exp<f64>,
    state: CellState,
    calls: Vec<Call>,
    parked: BinaryHeap<Transit>,
    now: f64,
    next_new: f64,
    seq: u64,
    stats: ReplicationStats,
    trace: Option<&'w mut dyn Write>,
}

impl<'a, 'w> Replication<'a, 'w> {
    fn new(setup: &'a Setup, r: u32, trace: Option<&'w mut dyn Write>) -> Result<Self, SimError> {
        let p = &setup.params;
        let config = |e: &dyn std::fmt::Display| SimError::Config(e.to_string());
        let class_pick = WeightedIndex::new(p.classes().iter().map(|c| c.mix)).map_err(|e| config(&e))?;
        let mut rng = ChaCha8Rng::seed_from_u64(setup.cfg.seed.wrapping_add(u64::from(r)));
        let interarrival = Exp::new(setup.cfg.lambda_n).map_err(|e| config(&e))?;
        let next_new = interarrival.sample(&mut rng);
        Ok(Self {
            setup,
            class_pick,
            interarrival,
            dwell: Exp::new(p.dwell_rate()).map_err(|e| config(&e))?,
            transit: Exp::new(1.0 / setup.transit_mean_s).map_err(|e| config(&e))?,
            rng,
            state: CellState::empty(p),
            calls: Vec::new(),
            parked: BinaryHeap::new(),
            now: 0.0,
            next_new,
            seq: 0,
            stats: ReplicationStats::default(),
            trace,
        })
    }

    fn params(&self) -> &'a SystemParams {
        &self.setup.params
    }

    fn in_window(&self) -> bool {
        self.now >= self.setup.cfg.warmup_s
    }

    fn run(mut self) -> Result<ReplicationStats, SimError> {
        if let Some(w) = self.trace.as_mut() {
            writeln!(w, "# replication 0, seed {}", self.setup.cfg.seed)?;
            writeln!(w, "# time\tevent\tclass\tkind\tdecision\toccupied_kbps")?;
        }
        let horizon = self.setup.cfg.horizon_s;
        loop {
            let (t, kind, call_index) = self.next_event();
            if t > horizon {
                self.advance(horizon);
                break;
            }
            self.advance(t);
            match kind {
                EventKind::Completion => self.complete(call_index)?,
                EventKind::Departure => self.depart(call_index)?,
                EventKind::HandoverArrival => self.handover_arrival()?,
                EventKind::NewArrival => self.new_arrival()?,
            }
            self.stats.events += 1;
            self.check()?;
        }
        self.stats.observed_s = horizon - self.setup.cfg.warmup_s;
        Ok(self.stats)
    }

    /// Earliest pending event; ties go by kind, then by call order.
    fn next_event(&self) -> (f64, EventKind, usize) {
        let mut best = (self.next_new, EventKind::NewArrival, 0);
        let mut consider = |t: f64, k: EventKind, i: usize| {
            if (t, k) < (best.0, best.1) {
                best = (t, k, i);
            }
        };
        if let Some(top) = self.parked.peek() {
            consider(top.back_at, EventKind::HandoverArrival, 0);
        }
        for (i, call) in self.calls.iter().enumerate() {
            consider(call.dwell_end, EventKind::Departure, i);
            consider(self.now + self.time_to_finish(call), EventKind::Completion, i);
        }
        best
    }

    fn time_to_finish(&self, call: &Call) -> f64 {
        match call.service {
            Service::Holding(left) => left,
            Service::Data { remaining, .. } => {
                let rate = self.state.alloc()[call.class];
                if rate > 0.0 {
                    remaining / rate
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Serves every active call at its current rate up to `t`.
    fn advance(&mut self, t: f64) {
        let dt = t - self.now;
        if dt <= 0.0 {
            return;
        }
        let warmup = self.setup.cfg.warmup_s;
        let counted = (t - self.now.max(warmup)).max(0.0);
        self.stats.busy_integral += counted * alloc::occupied(&self.state) / self.params().capacity_kbps();
        let alloc = self.state.alloc();
        for call in &mut self.calls {
            match &mut call.service {
                Service::Holding(left) => *left -= dt,
                Service::Data { remaining, delivered, .. } => {
                    let sent = alloc[call.class] * dt;
                    *remaining -= sent;
                    *delivered += sent;
                }
            }
        }
        self.now = t;
    }

    fn complete(&mut self, i: usize) -> Result<(), SimError> {
        let call = self.calls.swap_remove(i);
        if let Service::Data { remaining, total, delivered } = call.service {
            if remaining.abs() > WORK_TOLERANCE_KBIT {
                return Err(SimError::Invariant {
                    time: self.now,
                    message: format!("class {} call completed with {remaining} kbit left", call.class),
                });
            }
            let err = (delivered - total).abs() / total;
            self.stats.max_work_error = self.stats.max_work_error.max(err);
            self.stats.completed_adaptive += 1;
        }
        if call.tracked {
            self.stats.tracked_finished += 1;
            if call.handed_over {
                self.stats.tracked_with_handover += 1;
            }
        }
        self.state = self.state.release(self.params(), call.class)?;
        self.log(EventKind::Completion, call.class, "-", "-")
    }

    fn depart(&mut self, i: usize) -> Result<(), SimError> {
        let mut call = self.calls.swap_remove(i);
        self.state = self.state.release(self.params(), call.class)?;
        call.handed_over = true;
        let back_at = self.now + self.transit.sample(&mut self.rng);
        self.seq += 1;
        let class = call.class;
        self.parked.push(Transit { back_at, seq: self.seq, call });
        self.log(EventKind::Departure, class, "-", "-")
    }

    fn handover_arrival(&mut self) -> Result<(), SimError> {
        let Transit { mut call, .. } = self.parked.pop().expect("peeked transit");
        let counted = self.in_window();
        if counted {
            self.stats.handover_attempts += 1;
        }
        let outcome =
            alloc::admit_with(&self.state, self.params(), &self.setup.policy, call.class, CallKind::Handover)?;
        let decision = if let Some(next) = outcome.new_state {
            self.state = next;
            call.dwell_end = self.now + self.dwell.sample(&mut self.rng);
            self.calls.push(call.clone());
            "accepted"
        } else {
            if counted {
                self.stats.dropped_handover += 1;
            }
            if call.tracked {
                self.stats.tracked_finished += 1;
                self.stats.tracked_dropped += 1;
                self.stats.tracked_with_handover += 1;
            }
            "rejected"
        };
        self.log(EventKind::HandoverArrival, call.class, CallKind::Handover.as_str(), decision)
    }

    fn new_arrival(&mut self) -> Result<(), SimError> {
        self.next_new = self.now + self.interarrival.sample(&mut self.rng);
        let class_index = self.class_pick.sample(&mut self.rng);
        let counted = self.in_window();
        if counted {
            self.stats.offered_new += 1;
        }
        let outcome = alloc::admit_with(&self.state, self.params(), &self.setup.policy, class_index, CallKind::New)?;
        let decision = if let Some(next) = outcome.new_state {
            self.state = next;
            let call = self.fresh_call(class_index, counted);
            self.calls.push(call);
            "accepted"
        } else {
            if counted {
                self.stats.blocked_new += 1;
            }
            "rejected"
        };
        self.log(EventKind::NewArrival, class_index, CallKind::New.as_str(), decision)
    }

    fn fresh_call(&mut self, class_index: usize, tracked: bool) -> Call {
        let class = &self.params().classes()[class_index];
        let full_duration = self.rng.sample(Exp::new(1.0 / class.duration_mean_s).expect("positive mean"));
        let service = if class.realtime {
            Service::Holding(full_duration)
        } else {
            let total = full_duration * class.requested_kbps;
            Service::Data { remaining: total, total, delivered: 0.0 }
        };
        Call {
            class: class_index,
            service,
            dwell_end: self.now + self.dwell.sample(&mut self.rng),
            tracked,
            handed_over: false,
        }
    }

    fn check(&self) -> Result<(), SimError> {
        let fail = |message: String| SimError::Invariant { time: self.now, message };
        self.state.check_invariants(self.params()).map_err(|e| fail(e.to_string()))?;
        let mut counts = vec![0u32; self.params().classes().len()];
        for c in &self.calls {
            counts[c.class] += 1;
            if let Service::Data { remaining, .. } = c.service {
                if remaining < -WORK_TOLERANCE_KBIT {
                    return Err(fail(format!("class {} call overran its data volume by {} kbit", c.class, -remaining)));
                }
            }
        }
        if counts != self.state.counts() {
            return Err(fail(format!("census {:?} disagrees with active calls {counts:?}", self.state.counts())));
        }
        Ok(())
    }

    fn log(&mut self, kind: EventKind, class: usize, call_kind: &str, decision: &str) -> Result<(), SimError> {
        if let Some(w) = self.trace.as_mut() {
            let name = &self.setup.params.classes()[class].name;
            writeln!(
                w,
                "{:.6}\t{}\t{}\t{}\t{}\t{:.3}",
                self.now,
                kind.label(),
                name,
                call_kind,
                decision,
                alloc::occupied(&self.state)
            )?;
        }
        Ok(())
    }
}
