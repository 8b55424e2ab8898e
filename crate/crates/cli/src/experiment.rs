//! Scheme x load sweeps, analytical and simulated.

use std::io::Write;

use cac_core::chain::{self, SchemeKind, SchemeSpec};
use cac_core::sim;
use cac_core::KpiRow;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, SimSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Analyze,
    /// Analytical rows plus one simulated row per cell.
    Simulate,
}

/// A (scheme, load) cell that could not be evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub scheme: SchemeKind,
    pub lambda_n: f64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// Sorted by scheme label, load, then source.
    pub rows: Vec<KpiRow>,
    pub failures: Vec<CellFailure>,
    pub simulated: bool,
}

impl ExperimentOutput {
    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }
}

struct CellResult {
    rows: Vec<KpiRow>,
    failures: Vec<CellFailure>,
    trace: Vec<u8>,
}

/// Evaluates every cell of the sweep in parallel. Failed cells are reported
/// alongside the rows that did complete. With `trace`, the event trace of
/// the first replication of every simulated cell is written there, each
/// preceded by a `#` line naming the cell.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    mode: Mode,
    trace: Option<&mut dyn Write>,
) -> std::io::Result<ExperimentOutput> {
    let sim_settings = match mode {
        Mode::Analyze => None,
        Mode::Simulate => Some(cfg.sim.clone().unwrap_or_default()),
    };
    let want_trace = trace.is_some() && sim_settings.is_some();
    let mut cells: Vec<(SchemeSpec, f64)> =
        cfg.schemes.iter().flat_map(|s| cfg.sweep.iter().map(move |&ln| (*s, ln))).collect();
    cells.sort_by(|a, b| a.0.kind.label().cmp(b.0.kind.label()).then(a.1.total_cmp(&b.1)));

    let results: Vec<CellResult> = cells
        .par_iter()
        .map(|&(scheme, ln)| evaluate_cell(cfg, scheme, ln, sim_settings.as_ref(), want_trace))
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut sink = trace;
    for r in results {
        rows.extend(r.rows);
        failures.extend(r.failures);
        if let Some(w) = sink.as_mut() {
            w.write_all(&r.trace)?;
        }
    }
    rows.sort_by(|a, b| {
        a.scheme.label().cmp(b.scheme.label()).then(a.lambda_n.total_cmp(&b.lambda_n)).then(a.source.cmp(&b.source))
    });
    Ok(ExperimentOutput { rows, failures, simulated: sim_settings.is_some() })
}

fn evaluate_cell(
    cfg: &ExperimentConfig,
    scheme: SchemeSpec,
    lambda_n: f64,
    sim_settings: Option<&SimSettings>,
    want_trace: bool,
) -> CellResult {
    let mut out = CellResult { rows: Vec::new(), failures: Vec::new(), trace: Vec::new() };
    let fail = |message: String| CellFailure { scheme: scheme.kind, lambda_n, message };
    let def = cfg.output.forced_termination;

    match chain::solve_fixed_point(lambda_n, &cfg.params, &scheme) {
        Ok(sol) => match KpiRow::analytical(&sol, &cfg.params, def) {
            Ok(row) => out.rows.push(row),
            Err(e) => out.failures.push(fail(e.to_string())),
        },
        Err(e) => out.failures.push(fail(e.to_string())),
    }

    let Some(settings) = sim_settings else { return out };
    let topology = match scheme.topology(&cfg.params) {
        Ok(t) => t,
        Err(e) => {
            out.failures.push(fail(e.to_string()));
            return out;
        }
    };
    let sim_cfg = settings.for_load(lambda_n, cfg.new_call_reject);
    let report = if want_trace {
        let _ = writeln!(out.trace, "# scheme={} lambda_n={}", scheme.kind.label(), lambda_n);
        sim::run_traced(&cfg.params, &scheme, &sim_cfg, &mut out.trace)
    } else {
        sim::run(&cfg.params, &scheme, &sim_cfg)
    };
    match report {
        Ok(report) => out.rows.push(KpiRow::simulated(&report, topology, def)),
        Err(e) => out.failures.push(fail(e.to_string())),
    }
    out
}
