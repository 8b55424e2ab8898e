//! KPIs computed the same way from a chain solution or a simulation report.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainSolution, ChainTopology, SchemeKind};
use crate::model::SystemParams;
use crate::sim::SimReport;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("handovers per admitted call are undefined when every new call is blocked")]
    NoAdmittedCalls,
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KpiSource {
    Analytical,
    Simulated,
}

impl KpiSource {
    pub fn label(self) -> &'static str {
        match self {
            KpiSource::Analytical => "analytical",
            KpiSource::Simulated => "simulated",
        }
    }
}

/// What counts as a forced termination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcedTerminationDef {
    /// An admitted call is dropped at one of its handovers.
    #[default]
    AdmittedCalls,
    /// An originating call is blocked, or admitted and later dropped.
    IncludingBlocked,
}

/// One (scheme, load, source) line of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiRow {
    pub scheme: SchemeKind,
    pub lambda_n: f64,
    pub source: KpiSource,
    pub p_block: f64,
    pub p_drop: f64,
    pub utilization: f64,
    /// Handover attempts per admitted new call.
    pub handover_rate: f64,
    pub forced_termination: f64,
    pub topology: ChainTopology,
    pub fp_iterations: usize,
    /// Handover arrival rate into the cell, 1/s.
    pub lambda_h: f64,
    /// 95% half-widths, simulated rows only.
    pub p_block_ci: Option<f64>,
    pub p_drop_ci: Option<f64>,
}

impl KpiRow {
    pub fn analytical(
        solution: &ChainSolution,
        params: &SystemParams,
        def: ForcedTerminationDef,
    ) -> Result<Self, MetricsError> {
        Ok(Self {
            scheme: solution.scheme.kind,
            lambda_n: solution.lambda_n,
            source: KpiSource::Analytical,
            p_block: solution.p_block,
            p_drop: solution.p_drop,
            utilization: analytical_utilization(solution, params),
            handover_rate: handover_rate(solution.lambda_n, solution.lambda_h, solution.p_block)?,
            forced_termination: forced_termination_as(
                def,
                solution.p_block,
                solution.p_drop,
                solution.handover_probability,
            ),
            topology: solution.topology,
            fp_iterations: solution.iterations,
            lambda_h: solution.lambda_h,
            p_block_ci: None,
            p_drop_ci: None,
        })
    }

    pub fn simulated(report: &SimReport, topology: ChainTopology, def: ForcedTerminationDef) -> Self {
        let forced_termination = match def {
            ForcedTerminationDef::AdmittedCalls => report.forced_termination.mean,
            ForcedTerminationDef::IncludingBlocked => {
                let pb = report.p_block.mean;
                pb + (1.0 - pb) * report.forced_termination.mean
            }
        };
        Self {
            scheme: report.scheme.kind,
            lambda_n: report.lambda_n,
            source: KpiSource::Simulated,
            p_block: report.p_block.mean,
            p_drop: report.p_drop.mean,
            utilization: report.utilization.mean,
            handover_rate: report.handovers_per_admitted_call.mean,
            forced_termination,
            topology,
            fp_iterations: 0,
            lambda_h: report.handover_arrival_rate.mean,
            p_block_ci: Some(report.p_block.half_width),
            p_drop_ci: Some(report.p_drop.half_width),
        }
    }
}

/// Expected occupied share of the capacity under the stationary law.
///
/// Up to the base capacity every call holds its full average request; in
/// the degraded states adaptive calls absorb the whole remainder, so the
/// cell is full. Hard-QoS chains never leave the first regime.
pub fn analytical_utilization(solution: &ChainSolution, params: &SystemParams) -> f64 {
    let n_base = solution.topology.n_base;
    let per_call = params.mean_requested_kbps() / params.capacity_kbps();
    let util: f64 =
        solution.pi.iter().enumerate().map(|(i, p)| if i <= n_base { p * i as f64 * per_call } else { *p }).sum();
    util.clamp(0.0, 1.0)
}

/// Probability that an admitted call is eventually dropped at a handover:
/// it survives each handover attempt with probability `1 - p_drop`, and
/// makes another attempt with probability `p_h`.
pub fn forced_termination(p_block: f64, p_drop: f64, p_h: f64) -> f64 {
    forced_termination_as(ForcedTerminationDef::AdmittedCalls, p_block, p_drop, p_h)
}

pub fn forced_termination_as(def: ForcedTerminationDef, p_block: f64, p_drop: f64, p_h: f64) -> f64 {
    let denom = 1.0 - p_h * (1.0 - p_drop);
    let admitted = if denom > 0.0 { p_h * p_drop / denom } else { 0.0 };
    match def {
        ForcedTerminationDef::AdmittedCalls => admitted,
        ForcedTerminationDef::IncludingBlocked => p_block + (1.0 - p_block) * admitted,
    }
}

/// Handover attempts per admitted new call.
pub fn handover_rate(lambda_n: f64, lambda_h: f64, p_block: f64) -> Result<f64, MetricsError> {
    if !(lambda_n > 0.0) {
        return Err(MetricsError::NonPositive { name: "lambda_n", value: lambda_n });
    }
    let admitted = lambda_n * (1.0 - p_block);
    if !(admitted > 0.0) {
        return Err(MetricsError::NoAdmittedCalls);
    }
    Ok(lambda_h / admitted)
}
