//! Call admission control for multi-class wireless cells with adaptive,
//! handover-prioritized bandwidth degradation.
//!
//! The crate is split along the lines of the model:
//!
//! - [`model`]: traffic classes and scenario parameters.
//! - [`alloc`]: the live allocation engine and the admit/reject decision.
//! - [`chain`]: the birth-death performance model for all five schemes,
//!   including the handover-rate fixed point.
//! - [`sim`]: a discrete-event single-cell simulator running the real CAC.
//! - [`metrics`]: KPIs shared by the analytical and simulated paths.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod alloc;
pub mod chain;
pub mod metrics;
pub mod model;
pub mod sim;

pub use alloc::{AdmissionPolicy, AdmitOutcome, CallKind, CellState, Decision, NewCallRejectRule};
pub use chain::{ChainSolution, ChainTopology, SchemeKind, SchemeSpec};
pub use metrics::{ForcedTerminationDef, KpiRow, KpiSource};
pub use model::{BandwidthLevels, ModelError, SystemParams, TrafficClass};
pub use sim::{Estimate, SimConfig, SimReport};

/// Absolute tolerance for bandwidth comparisons, kbit/s.
pub const BANDWIDTH_EPS: f64 = 1e-9;
