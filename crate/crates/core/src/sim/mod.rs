//! Discrete-event simulation of a single cell running the live CAC.
//!
//! New calls arrive as a Poisson stream with classes drawn from the mix.
//! Real-time calls hold for an exponential time; adaptive calls carry an
//! exponential data volume and finish when it has been delivered at
//! whatever rate the allocator currently grants them. When a call's dwell
//! timer runs out it leaves the cell, spends an exponential transit time in
//! a statistically identical neighbour (its service frozen), and comes back
//! as a handover arrival. Handover traffic is therefore generated by the
//! cell's own departures and needs no fixed point.

mod engine;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::alloc::{AllocError, NewCallRejectRule};
use crate::chain::{ChainError, SchemeSpec};
use crate::model::SystemParams;

pub use engine::ReplicationStats;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error(transparent)]
    Scenario(#[from] ChainError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error("simulation invariant violated at t={time}: {message}")]
    Invariant { time: f64, message: String },
    #[error("trace output failed: {0}")]
    Trace(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// New-call arrival rate, 1/s.
    pub lambda_n: f64,
    /// Simulated seconds per replication.
    pub horizon_s: f64,
    /// Leading seconds excluded from every statistic.
    pub warmup_s: f64,
    pub replications: u32,
    /// Replication `r` draws from stream `seed + r`.
    pub seed: u64,
    /// Mean time a departed call spends in the neighbouring cell before it
    /// comes back as a handover; defaults to the mean dwell time.
    pub transit_mean_s: Option<f64>,
    pub new_call_reject: NewCallRejectRule,
}

impl SimConfig {
    pub const DEFAULT_HORIZON_S: f64 = 20_000.0;
    pub const DEFAULT_REPLICATIONS: u32 = 20;

    /// Defaults: 20 replications, warmup of 10% of the horizon.
    pub fn new(lambda_n: f64, horizon_s: f64, seed: u64) -> Self {
        Self {
            lambda_n,
            horizon_s,
            warmup_s: 0.1 * horizon_s,
            replications: Self::DEFAULT_REPLICATIONS,
            seed,
            transit_mean_s: None,
            new_call_reject: NewCallRejectRule::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let mut problems = Vec::new();
        if !(self.lambda_n > 0.0 && self.lambda_n.is_finite()) {
            problems.push(format!("lambda_n must be positive (got {})", self.lambda_n));
        }
        if !(self.warmup_s >= 0.0 && self.horizon_s > self.warmup_s && self.horizon_s.is_finite()) {
            problems
                .push(format!("need horizon > warmup >= 0 (got horizon {}, warmup {})", self.horizon_s, self.warmup_s));
        }
        if self.replications == 0 {
            problems.push("at least one replication is required".into());
        }
        if let Some(t) = self.transit_mean_s {
            if !(t > 0.0 && t.is_finite()) {
                problems.push(format!("transit mean must be positive (got {t})"));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SimError::Config(problems.join("; ")))
        }
    }
}

/// Mean across replications with the 95% Student-t half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        if n < 2 {
            return Self { mean, half_width: f64::INFINITY };
        }
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("positive degrees of freedom").inverse_cdf(0.975);
        Self { mean, half_width: t * (var / n as f64).sqrt() }
    }

    pub fn contains_within(&self, value: f64, half_widths: f64) -> bool {
        (self.mean - value).abs() <= half_widths * self.half_width
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub scheme: SchemeSpec,
    pub lambda_n: f64,
    pub replications: u32,
    pub offered_new: u64,
    pub blocked_new: u64,
    pub admitted_new: u64,
    pub handover_attempts: u64,
    pub dropped_handover: u64,
    pub p_block: Estimate,
    pub p_drop: Estimate,
    /// Time average of occupied / capacity.
    pub utilization: Estimate,
    pub handovers_per_admitted_call: Estimate,
    /// Share of admitted new calls that were later dropped at a handover.
    pub forced_termination: Estimate,
    /// Share of finished calls that attempted at least one handover.
    pub handover_fraction: Estimate,
    /// Handover arrivals per second.
    pub handover_arrival_rate: Estimate,
    /// Largest relative gap between delivered and drawn data volume over all
    /// completed adaptive calls.
    pub max_work_error: f64,
}

impl SimReport {
    fn aggregate(scheme: SchemeSpec, cfg: &SimConfig, reps: &[ReplicationStats]) -> Self {
        let est = |f: &dyn Fn(&ReplicationStats) -> f64| {
            let xs: Vec<f64> = reps.iter().map(f).collect();
            Estimate::from_samples(&xs)
        };
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        Self {
            scheme,
            lambda_n: cfg.lambda_n,
            replications: cfg.replications,
            offered_new: reps.iter().map(|r| r.offered_new).sum(),
            blocked_new: reps.iter().map(|r| r.blocked_new).sum(),
            admitted_new: reps.iter().map(|r| r.offered_new - r.blocked_new).sum(),
            handover_attempts: reps.iter().map(|r| r.handover_attempts).sum(),
            dropped_handover: reps.iter().map(|r| r.dropped_handover).sum(),
            p_block: est(&|r| ratio(r.blocked_new, r.offered_new)),
            p_drop: est(&|r| ratio(r.dropped_handover, r.handover_attempts)),
            utilization: est(&|r| r.busy_integral / r.observed_s),
            handovers_per_admitted_call: est(&|r| ratio(r.handover_attempts, r.offered_new - r.blocked_new)),
            forced_termination: est(&|r| ratio(r.tracked_dropped, r.tracked_finished)),
            handover_fraction: est(&|r| ratio(r.tracked_with_handover, r.tracked_finished)),
            handover_arrival_rate: est(&|r| r.handover_attempts as f64 / r.observed_s),
            max_work_error: reps.iter().map(|r| r.max_work_error).fold(0.0, f64::max),
        }
    }
}

/// Runs every replication (in parallel) and aggregates them.
pub fn run(params: &SystemParams, scheme: &SchemeSpec, cfg: &SimConfig) -> Result<SimReport, SimError> {
    let reps = replications(params, scheme, cfg, None)?;
    Ok(SimReport::aggregate(*scheme, cfg, &reps))
}

/// Like [`run`], additionally writing the event trace of replication 0.
pub fn run_traced(
    params: &SystemParams,
    scheme: &SchemeSpec,
    cfg: &SimConfig,
    trace: &mut dyn Write,
) -> Result<SimReport, SimError> {
    let reps = replications(params, scheme, cfg, Some(trace))?;
    Ok(SimReport::aggregate(*scheme, cfg, &reps))
}

/// Raw per-replication counters, in replication order.
pub fn replications(
    params: &SystemParams,
    scheme: &SchemeSpec,
    cfg: &SimConfig,
    trace: Option<&mut dyn Write>,
) -> Result<Vec<ReplicationStats>, SimError> {
    cfg.validate()?;
    let setup = engine::Setup::new(params, scheme, cfg)?;
    let first = setup.replicate(0, trace)?;
    let rest: Vec<ReplicationStats> =
        (1..cfg.replications).into_par_iter().map(|r| setup.replicate(r, None)).collect::<Result<_, _>>()?;
    let mut all = Vec::with_capacity(cfg.replications as usize);
    all.push(first);
    all.extend(rest);
    Ok(all)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn estimate_matches_textbook_t_interval() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(e.mean, 3.0);
        // t_{0.975, 4} = 2.776445, s = sqrt(2.5)
        assert_relative_eq!(e.half_width, 2.776_445_105 * (2.5f64 / 5.0).sqrt(), epsilon = 1e-6);
        assert!(Estimate::from_samples(&[0.5]).half_width.is_infinite());
        assert_eq!(Estimate::from_samples(&[0.2; 4]).half_width, 0.0);
    }

    #[test]
    fn config_validation() {
        let ok = SimConfig::new(0.1, 1000.0, 7);
        assert_eq!(ok.warmup_s, 100.0);
        ok.validate().unwrap();
        let mut bad = ok.clone();
        bad.replications = 0;
        bad.warmup_s = 2000.0;
        let SimError::Config(msg) = bad.validate().unwrap_err() else { panic!() };
        assert!(msg.contains("replication") && msg.contains("horizon"));
    }
}
