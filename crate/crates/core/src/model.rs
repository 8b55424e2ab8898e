//! Traffic classes and scenario parameters, plus the closed-form relations
//! built on them (admission floors, handover probability).

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the arrival-mix normalization.
pub const MIX_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid scenario parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),
    #[error("invalid allocation: {allocated} kbit/s against a request of {requested} kbit/s")]
    InvalidAllocation { requested: f64, allocated: f64 },
    #[error("{name} must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// One service class of the cell.
///
/// Real-time classes cannot be degraded, so both of their degradation
/// factors are zero. For adaptive classes `gamma_new <= gamma_handover`
/// reserves more reclaimable bandwidth for handovers than for new calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficClass {
    pub name: String,
    pub realtime: bool,
    /// Requested per-call bandwidth, kbit/s.
    pub requested_kbps: f64,
    /// Largest fraction of an admitted call's request that may be reclaimed
    /// to admit a new call.
    pub gamma_new: f64,
    /// Largest fraction of an admitted call's request that may be reclaimed
    /// to admit a handover call.
    pub gamma_handover: f64,
    /// Fraction of arrivals belonging to this class.
    pub mix: f64,
    /// Mean call duration at the full requested bandwidth, seconds.
    pub duration_mean_s: f64,
}

impl TrafficClass {
    fn violations(&self, out: &mut Vec<String>) {
        let n = &self.name;
        if !(self.requested_kbps > 0.0 && self.requested_kbps.is_finite()) {
            out.push(format!("class {n}: requested bandwidth must be positive (got {})", self.requested_kbps));
        }
        if !(self.duration_mean_s > 0.0 && self.duration_mean_s.is_finite()) {
            out.push(format!("class {n}: mean duration must be positive (got {})", self.duration_mean_s));
        }
        if !(0.0..=1.0).contains(&self.mix) {
            out.push(format!("class {n}: mix fraction must lie in [0, 1] (got {})", self.mix));
        }
        if self.realtime && (self.gamma_new != 0.0 || self.gamma_handover != 0.0) {
            out.push(format!(
                "class {n}: real-time classes cannot be degraded, both degradation factors must be 0 (got new={}, handover={})",
                self.gamma_new, self.gamma_handover
            ));
        }
        if !(0.0..1.0).contains(&self.gamma_new) || !(0.0..1.0).contains(&self.gamma_handover) {
            out.push(format!(
                "class {n}: degradation factors must lie in [0, 1) (got new={}, handover={})",
                self.gamma_new, self.gamma_handover
            ));
        }
        if self.gamma_new > self.gamma_handover {
            out.push(format!(
                "class {n}: new-call degradation {} exceeds handover degradation {}",
                self.gamma_new, self.gamma_handover
            ));
        }
    }

    pub fn levels(&self) -> BandwidthLevels {
        min_bandwidth_levels(self)
    }
}

/// Full scenario definition: capacity, ordered class list, mobility.
///
/// Real-time classes come first. Construct through [`SystemParams::new`],
/// which reports every violated constraint at once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    capacity_kbps: f64,
    classes: Vec<TrafficClass>,
    dwell_mean_s: f64,
}

impl SystemParams {
    pub fn new(capacity_kbps: f64, classes: Vec<TrafficClass>, dwell_mean_s: f64) -> Result<Self, ModelError> {
        let params = Self { capacity_kbps, classes, dwell_mean_s };
        let violations = params.violations();
        if violations.is_empty() {
            Ok(params)
        } else {
            Err(ModelError::InvalidParams(violations))
        }
    }

    /// Every constraint the parameters break, in a stable order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.classes.is_empty() {
            out.push("at least one traffic class is required".to_string());
        }
        for class in &self.classes {
            class.violations(&mut out);
        }
        let mix_sum: f64 = self.classes.iter().map(|c| c.mix).sum();
        if !self.classes.is_empty() && (mix_sum - 1.0).abs() > MIX_SUM_TOLERANCE {
            out.push(format!("arrival mix fractions must sum to 1 (got {mix_sum})"));
        }
        if let Some(pos) = self.classes.iter().position(|c| !c.realtime) {
            if let Some(late) = self.classes[pos..].iter().find(|c| c.realtime) {
                out.push(format!("class {}: real-time classes must precede all non-real-time classes", late.name));
            }
        }
        if !(self.dwell_mean_s > 0.0) {
            out.push(format!("mean dwell time must be positive (got {})", self.dwell_mean_s));
        }
        let max_request = self.classes.iter().map(|c| c.requested_kbps).fold(0.0, f64::max);
        if !(self.capacity_kbps.is_finite() && self.capacity_kbps > max_request) {
            out.push(format!(
                "capacity {} kbit/s must exceed the largest per-call request {} kbit/s",
                self.capacity_kbps, max_request
            ));
        }
        out
    }

    pub fn capacity_kbps(&self) -> f64 {
        self.capacity_kbps
    }

    pub fn classes(&self) -> &[TrafficClass] {
        &self.classes
    }

    pub fn dwell_mean_s(&self) -> f64 {
        self.dwell_mean_s
    }

    /// Cell departure rate per call, 1/s.
    pub fn dwell_rate(&self) -> f64 {
        1.0 / self.dwell_mean_s
    }

    /// Number of real-time classes (they occupy indices `0..q`).
    pub fn realtime_count(&self) -> usize {
        self.classes.iter().take_while(|c| c.realtime).count()
    }

    /// Mix-weighted requested bandwidth, kbit/s per call.
    pub fn mean_requested_kbps(&self) -> f64 {
        self.classes.iter().map(|c| c.mix * c.requested_kbps).sum()
    }

    /// Mix-weighted mean duration at full bandwidth, seconds.
    pub fn mean_full_duration_s(&self) -> f64 {
        self.classes.iter().map(|c| c.mix * c.duration_mean_s).sum()
    }

    /// Copy of these parameters with the degradation factors rewritten per
    /// class. The rewrite must keep every class valid.
    pub fn with_gammas(&self, f: impl Fn(&TrafficClass) -> (f64, f64)) -> Result<Self, ModelError> {
        let classes = self
            .classes
            .iter()
            .map(|c| {
                let (gamma_new, gamma_handover) = f(c);
                TrafficClass { gamma_new, gamma_handover, ..c.clone() }
            })
            .collect();
        Self::new(self.capacity_kbps, classes, self.dwell_mean_s)
    }

    /// Seven-class reference mix (three real-time, four adaptive classes),
    /// 240 s dwell and 120 s duration for every class.
    pub fn reference(capacity_kbps: f64) -> Result<Self, ModelError> {
        let class = |name: &str, realtime, requested_kbps, gamma_new, gamma_handover, mix| TrafficClass {
            name: name.to_string(),
            realtime,
            requested_kbps,
            gamma_new,
            gamma_handover,
            mix,
            duration_mean_s: 120.0,
        };
        Self::new(
            capacity_kbps,
            vec![
                class("conversational_voice", true, 25.0, 0.0, 0.0, 0.35),
                class("conversational_video", true, 128.0, 0.0, 0.0, 0.10),
                class("realtime_gaming", true, 56.0, 0.0, 0.0, 0.05),
                class("buffered_streaming_video", false, 128.0, 0.4, 0.6, 0.15),
                class("voice_messaging", false, 13.0, 0.2, 0.3, 0.10),
                class("web_browsing", false, 56.0, 0.2, 0.5, 0.15),
                class("background", false, 56.0, 0.5, 0.8, 0.10),
            ],
            240.0,
        )
    }
}

/// Per-call admission floors of one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthLevels {
    /// Lowest allocation that still lets a new call in, kbit/s.
    pub new_floor_kbps: f64,
    /// Lowest allocation that still lets a handover call in, kbit/s.
    pub handover_floor_kbps: f64,
}

pub fn min_bandwidth_levels(class: &TrafficClass) -> BandwidthLevels {
    BandwidthLevels {
        new_floor_kbps: (1.0 - class.gamma_new) * class.requested_kbps,
        handover_floor_kbps: (1.0 - class.gamma_handover) * class.requested_kbps,
    }
}

/// Fraction of the request that has been taken away from a call running at
/// `allocated_kbps`.
pub fn degradation_factor(requested_kbps: f64, allocated_kbps: f64) -> Result<f64, ModelError> {
    if !(allocated_kbps > 0.0 && allocated_kbps <= requested_kbps) {
        return Err(ModelError::InvalidAllocation { requested: requested_kbps, allocated: allocated_kbps });
    }
    Ok((requested_kbps - allocated_kbps) / requested_kbps)
}

/// Probability that a call leaves the cell before it completes, with
/// exponential dwell and duration: `eta / (eta + mu)`.
pub fn handover_probability(dwell_mean_s: f64, call_duration_mean_s: f64) -> Result<f64, ModelError> {
    check_positive("dwell mean", dwell_mean_s)?;
    check_positive("call duration mean", call_duration_mean_s)?;
    let eta = 1.0 / dwell_mean_s;
    let mu = 1.0 / call_duration_mean_s;
    Ok(eta / (eta + mu))
}

/// Per-call channel release rate when nobody is degraded: dwell rate plus
/// the inverse of the mix-weighted full-bandwidth duration.
pub fn base_release_rate(params: &SystemParams) -> f64 {
    params.dwell_rate() + 1.0 / params.mean_full_duration_s()
}

fn check_positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value > 0.0 && !value.is_nan() {
        Ok(())
    } else {
        Err(ModelError::NonPositive { name, value })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference() -> SystemParams {
        SystemParams::reference(5885.0).unwrap()
    }

    fn class_named<'a>(p: &'a SystemParams, name: &str) -> &'a TrafficClass {
        p.classes().iter().find(|c| c.name == name).unwrap()
    }

    #[test]
    fn levels_for_reference_classes() {
        let p = reference();
        let bg = class_named(&p, "background").levels();
        assert_relative_eq!(bg.new_floor_kbps, 28.0, epsilon = 1e-12);
        assert_relative_eq!(bg.handover_floor_kbps, 11.2, epsilon = 1e-12);

        let voice = class_named(&p, "conversational_voice").levels();
        assert_eq!(voice.new_floor_kbps, 25.0);
        assert_eq!(voice.handover_floor_kbps, 25.0);

        let bsv = class_named(&p, "buffered_streaming_video").levels();
        assert_relative_eq!(bsv.new_floor_kbps, 76.8, epsilon = 1e-12);
        assert_relative_eq!(bsv.handover_floor_kbps, 51.2, epsilon = 1e-12);
    }

    #[test]
    fn degradation_factor_examples() {
        assert_eq!(degradation_factor(128.0, 128.0).unwrap(), 0.0);
        assert_relative_eq!(degradation_factor(56.0, 11.2).unwrap(), 0.8, epsilon = 1e-12);
        assert_relative_eq!(degradation_factor(13.0, 9.1).unwrap(), 0.3, epsilon = 1e-12);
        assert!(degradation_factor(56.0, 57.0).is_err());
        assert!(degradation_factor(56.0, 0.0).is_err());
    }

    #[test]
    fn handover_probability_examples() {
        assert_relative_eq!(handover_probability(240.0, 120.0).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert!(handover_probability(240.0, 1e-9).unwrap() < 1e-10);
        assert_eq!(handover_probability(120.0, 120.0).unwrap(), 0.5);
        assert!(handover_probability(0.0, 120.0).is_err());
        assert!(handover_probability(240.0, -1.0).is_err());
    }

    #[test]
    fn base_release_rate_examples() {
        assert_relative_eq!(base_release_rate(&reference()), 0.0125, epsilon = 1e-15);

        let mut classes = reference().classes()[3..5].to_vec();
        classes[0].mix = 0.5;
        classes[0].duration_mean_s = 60.0;
        classes[1].mix = 0.5;
        classes[1].duration_mean_s = 180.0;
        let p = SystemParams::new(1000.0, classes.clone(), 240.0).unwrap();
        assert_relative_eq!(base_release_rate(&p), 1.0 / 240.0 + 1.0 / 120.0, epsilon = 1e-15);

        classes.truncate(1);
        classes[0].mix = 1.0;
        let p = SystemParams::new(1000.0, classes, 1e12).unwrap();
        assert_relative_eq!(base_release_rate(&p), 1.0 / 60.0, epsilon = 1e-12);
    }

    #[test]
    fn validation_reports_every_violation() {
        let mut classes = reference().classes().to_vec();
        classes[0].gamma_handover = 0.5;
        classes[6].mix = 0.0;
        classes[5].gamma_new = 0.6;
        let err = SystemParams::new(5885.0, classes, 240.0).unwrap_err();
        let ModelError::InvalidParams(v) = err else { panic!() };
        assert!(v.iter().any(|m| m.contains("real-time classes cannot be degraded")));
        assert!(v.iter().any(|m| m.contains("must sum to 1")));
        assert!(v.iter().any(|m| m.contains("exceeds handover degradation")));
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn validation_rejects_misordered_classes_and_small_capacity() {
        let mut classes = reference().classes().to_vec();
        classes.swap(0, 6);
        assert!(SystemParams::new(5885.0, classes, 240.0).is_err());
        assert!(SystemParams::reference(128.0).is_err());
        assert!(SystemParams::new(100.0, vec![], 240.0).is_err());
    }

    #[test]
    fn all_realtime_and_all_adaptive_mixes_are_valid() {
        let p = reference();
        let mut rt = p.classes()[..1].to_vec();
        rt[0].mix = 1.0;
        assert_eq!(SystemParams::new(100.0, rt, 240.0).unwrap().realtime_count(), 1);
        let mut nrt = p.classes()[6..].to_vec();
        nrt[0].mix = 1.0;
        assert_eq!(SystemParams::new(100.0, nrt, 240.0).unwrap().realtime_count(), 0);
    }

    proptest! {
        #[test]
        fn levels_round_trip(beta in 1.0f64..500.0, gn in 0.0f64..0.95, extra in 0.0f64..0.04) {
            let gh = gn + extra;
            let class = TrafficClass {
                name: "x".into(), realtime: false, requested_kbps: beta,
                gamma_new: gn, gamma_handover: gh, mix: 1.0, duration_mean_s: 1.0,
            };
            let lv = min_bandwidth_levels(&class);
            prop_assert!(lv.handover_floor_kbps <= lv.new_floor_kbps && lv.new_floor_kbps <= beta);
            prop_assert!((degradation_factor(beta, lv.handover_floor_kbps).unwrap() - gh).abs() <= 1e-12);
            prop_assert!((degradation_factor(beta, lv.new_floor_kbps).unwrap() - gn).abs() <= 1e-12);
        }

        #[test]
        fn handover_probability_monotone(dwell in 1.0f64..1e4, dur in 1.0f64..1e4, k in 1.01f64..10.0) {
            let p = handover_probability(dwell, dur).unwrap();
            prop_assert!(p > 0.0 && p < 1.0);
            prop_assert!(handover_probability(dwell, dur * k).unwrap() >= p);
            prop_assert!(handover_probability(dwell * k, dur).unwrap() <= p);
        }

        #[test]
        fn mix_off_by_more_than_tolerance_is_rejected(delta in 1e-8f64..0.2) {
            let mut classes = reference().classes().to_vec();
            classes[0].mix += delta;
            prop_assert!(SystemParams::new(5885.0, classes, 240.0).is_err());
        }
    }
}
