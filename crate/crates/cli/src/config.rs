//! Experiment configuration: TOML text in, validated settings out.

use std::path::{Path, PathBuf};

use cac_core::chain::{SchemeKind, SchemeSpec};
use cac_core::sim::SimConfig;
use cac_core::{ForcedTerminationDef, ModelError, NewCallRejectRule, SystemParams, TrafficClass};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Syntax(String),
    #[error("invalid config:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: RawSystem,
    sweep: RawSweep,
    schemes: RawSchemes,
    sim: Option<RawSim>,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    admission: RawAdmission,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    capacity_kbps: f64,
    dwell_mean_s: f64,
    /// Default for classes that do not set their own.
    duration_mean_s: Option<f64>,
    classes: Vec<RawClass>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawClass {
    name: String,
    realtime: bool,
    requested_kbps: f64,
    #[serde(default)]
    gamma_new: f64,
    #[serde(default)]
    gamma_handover: f64,
    mix: f64,
    duration_mean_s: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    values: Option<Vec<f64>>,
    start: Option<f64>,
    stop: Option<f64>,
    steps: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSchemes {
    kinds: Vec<String>,
    guard_fraction: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSim {
    horizon_s: Option<f64>,
    warmup_s: Option<f64>,
    replications: Option<u32>,
    #[serde(default)]
    seed: u64,
    transit_mean_s: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    csv: Option<PathBuf>,
    trace: Option<PathBuf>,
    #[serde(default)]
    forced_termination: ForcedTerminationDef,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdmission {
    #[serde(default)]
    new_call_reject: NewCallRejectRule,
}

/// Simulation settings shared by every cell of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub horizon_s: f64,
    /// Defaults to 10% of the horizon.
    pub warmup_s: Option<f64>,
    pub replications: u32,
    pub seed: u64,
    pub transit_mean_s: Option<f64>,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            horizon_s: SimConfig::DEFAULT_HORIZON_S,
            warmup_s: None,
            replications: SimConfig::DEFAULT_REPLICATIONS,
            seed: 0,
            transit_mean_s: None,
        }
    }
}

impl SimSettings {
    pub fn for_load(&self, lambda_n: f64, rule: NewCallRejectRule) -> SimConfig {
        let mut cfg = SimConfig::new(lambda_n, self.horizon_s, self.seed);
        if let Some(w) = self.warmup_s {
            cfg.warmup_s = w;
        }
        cfg.replications = self.replications;
        cfg.transit_mean_s = self.transit_mean_s;
        cfg.new_call_reject = rule;
        cfg
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputSettings {
    pub csv: Option<PathBuf>,
    pub trace: Option<PathBuf>,
    pub forced_termination: ForcedTerminationDef,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: SystemParams,
    /// Strictly increasing new-call rates, 1/s.
    pub sweep: Vec<f64>,
    pub schemes: Vec<SchemeSpec>,
    pub sim: Option<SimSettings>,
    pub output: OutputSettings,
    pub new_call_reject: NewCallRejectRule,
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
    parse_config(&text)
}

/// Parses and validates a config, reporting every violation at once.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let mut problems = Vec::new();

    let params = system_params(&raw.system, &mut problems);
    let sweep = sweep_values(&raw.sweep, &mut problems);
    let schemes = scheme_specs(&raw.schemes, &mut problems);
    let sim = raw.sim.map(|s| sim_settings(s, &mut problems));

    match params {
        Some(params) if problems.is_empty() => Ok(ExperimentConfig {
            params,
            sweep,
            schemes,
            sim,
            output: OutputSettings {
                csv: raw.output.csv,
                trace: raw.output.trace,
                forced_termination: raw.output.forced_termination,
            },
            new_call_reject: raw.admission.new_call_reject,
        }),
        _ => Err(ConfigError::Invalid(problems)),
    }
}

fn system_params(raw: &RawSystem, problems: &mut Vec<String>) -> Option<SystemParams> {
    let mut missing_duration = false;
    let classes: Vec<TrafficClass> = raw
        .classes
        .iter()
        .map(|c| TrafficClass {
            name: c.name.clone(),
            realtime: c.realtime,
            requested_kbps: c.requested_kbps,
            gamma_new: c.gamma_new,
            gamma_handover: c.gamma_handover,
            mix: c.mix,
            duration_mean_s: c.duration_mean_s.or(raw.duration_mean_s).unwrap_or_else(|| {
                problems.push(format!(
                    "system.classes.{}: duration_mean_s missing and no system.duration_mean_s default",
                    c.name
                ));
                missing_duration = true;
                f64::NAN
            }),
        })
        .collect();
    match SystemParams::new(raw.capacity_kbps, classes, raw.dwell_mean_s) {
        Ok(p) if !missing_duration => Some(p),
        Ok(_) => None,
        Err(ModelError::InvalidParams(vs)) => {
            problems.extend(
                vs.into_iter()
                    .filter(|v| !(missing_duration && v.contains("duration")))
                    .map(|v| format!("system: {v}")),
            );
            None
        }
        Err(e) => {
            problems.push(format!("system: {e}"));
            None
        }
    }
}

fn sweep_values(raw: &RawSweep, problems: &mut Vec<String>) -> Vec<f64> {
    let values = match (&raw.values, raw.start, raw.stop, raw.steps) {
        (Some(v), None, None, None) => v.clone(),
        (None, Some(start), Some(stop), Some(steps)) => {
            if steps < 2 {
                problems.push(format!("sweep.steps must be at least 2 (got {steps})"));
                return Vec::new();
            }
            let last = (steps - 1) as f64;
            (0..steps).map(|k| start + (stop - start) * k as f64 / last).collect()
        }
        _ => {
            problems.push("sweep: give either `values` or all of `start`, `stop`, `steps`".into());
            return Vec::new();
        }
    };
    if values.is_empty() {
        problems.push("sweep: at least one load is required".into());
    }
    if let Some(bad) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        problems.push(format!("sweep: loads must be positive (got {bad})"));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        problems.push("sweep: loads must be strictly increasing".into());
    }
    values
}

fn scheme_specs(raw: &RawSchemes, problems: &mut Vec<String>) -> Vec<SchemeSpec> {
    let guard_fraction = raw.guard_fraction.unwrap_or(SchemeSpec::DEFAULT_GUARD_FRACTION);
    if !(0.0..=1.0).contains(&guard_fraction) {
        problems.push(format!("schemes.guard_fraction must lie in [0, 1] (got {guard_fraction})"));
    }
    if raw.kinds.is_empty() {
        problems.push("schemes.kinds: at least one scheme is required".into());
    }
    let mut specs: Vec<SchemeSpec> = Vec::new();
    for label in &raw.kinds {
        match SchemeKind::from_label(label) {
            Some(kind) if specs.iter().any(|s| s.kind == kind) => {
                problems.push(format!("schemes.kinds: {label} listed twice"));
            }
            Some(kind) => specs.push(SchemeSpec { kind, guard_fraction }),
            None => {
                let known: Vec<&str> = SchemeKind::ALL.iter().map(|k| k.label()).collect();
                problems.push(format!("schemes.kinds: unknown scheme {label} (expected one of {})", known.join(", ")));
            }
        }
    }
    specs
}

fn sim_settings(raw: RawSim, problems: &mut Vec<String>) -> SimSettings {
    let d = SimSettings::default();
    let s = SimSettings {
        horizon_s: raw.horizon_s.unwrap_or(d.horizon_s),
        warmup_s: raw.warmup_s,
        replications: raw.replications.unwrap_or(d.replications),
        seed: raw.seed,
        transit_mean_s: raw.transit_mean_s,
    };
    if let Err(e) = s.for_load(1.0, NewCallRejectRule::default()).validate() {
        problems.push(format!("sim: {e}"));
    }
    s
}
