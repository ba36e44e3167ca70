use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use crate::decision::State;
use crate::scenario::{FrameLabel, Tier};

pub const GATE_SENSITIVITY: f64 = 0.90;
pub const GATE_SPECIFICITY: f64 = 0.90;
/// Distracted-pedestrian perception-reaction time in seconds.
pub const GATE_BUDGET_S: f64 = 1.87;

/// Per-frame tallies. Additive, so runs can be merged in any order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub frames: usize,
    pub alerts: usize,
    pub actionable: usize,
    pub actionable_alerted: usize,
    pub imminent: usize,
    pub imminent_alerted: usize,
    pub safe: usize,
    pub safe_alerted: usize,
    pub severity_actionable: f64,
    pub severity_missed: f64,
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.frames += o.frames;
        self.alerts += o.alerts;
        self.actionable += o.actionable;
        self.actionable_alerted += o.actionable_alerted;
        self.imminent += o.imminent;
        self.imminent_alerted += o.imminent_alerted;
        self.safe += o.safe;
        self.safe_alerted += o.safe_alerted;
        self.severity_actionable += o.severity_actionable;
        self.severity_missed += o.severity_missed;
    }
}

impl Counts {
    pub fn tally(states: &[State], labels: &[FrameLabel]) -> Counts {
        assert_eq!(states.len(), labels.len(), "verdicts and labels must be aligned");
        let mut c = Counts { frames: states.len(), ..Counts::default() };
        for (s, l) in states.iter().zip(labels) {
            let alert = *s == State::Alert;
            c.alerts += alert as usize;
            match l.tier {
                Tier::Actionable => {
                    c.actionable += 1;
                    c.severity_actionable += l.severity;
                    if alert {
                        c.actionable_alerted += 1;
                    } else {
                        c.severity_missed += l.severity;
                    }
                }
                Tier::Imminent => {
                    c.imminent += 1;
                    c.imminent_alerted += alert as usize;
                }
                Tier::None => {
                    c.safe += 1;
                    c.safe_alerted += alert as usize;
                }
            }
        }
        c
    }

    pub fn metrics(&self) -> Metrics {
        let ratio = |num: f64, den: f64| (den > 0.0).then(|| num / den);
        Metrics {
            sensitivity: ratio(self.actionable_alerted as f64, self.actionable as f64),
            specificity: ratio(self.safe_alerted as f64, self.safe as f64).map(|fp| 1.0 - fp),
            sev_fn: ratio(self.severity_missed, self.severity_actionable),
            fatigue: ratio(self.alerts as f64, self.frames as f64),
        }
    }
}

/// Rates over a set of frames. `None` means the denominator was empty.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub sev_fn: Option<f64>,
    pub fatigue: Option<f64>,
}

/// Sensitivity and SevFN count actionable frames only; alerts during
/// imminent frames are neither hits nor false positives.
pub fn compute_metrics(states: &[State], labels: &[FrameLabel]) -> Metrics {
    Counts::tally(states, labels).metrics()
}

/// Seconds from the first ALERT to the closest approach of the first
/// actionable pair. `None` when the scenario has no actionable frame or the
/// pipeline did not alert by the closest approach.
pub fn warning_budget(states: &[State], labels: &[FrameLabel], fps: f64) -> Option<f64> {
    let first = labels.iter().position(|l| l.tier == Tier::Actionable)?;
    let cpa_frame = first + (labels[first].ttc_s * fps).round() as usize;
    let alert = states.iter().take(cpa_frame + 1).position(|s| *s == State::Alert)?;
    Some((cpa_frame - alert) as f64 / fps)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateCheck {
    pub name: String,
    pub value: Option<f64>,
    pub threshold: f64,
    /// `>=` or `>`
    pub comparison: String,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub pass: bool,
    pub checks: Vec<GateCheck>,
}

/// The three deployment gates. An undefined value fails its gate.
pub fn evaluate_gates(metrics: &Metrics, mean_budget_s: Option<f64>) -> GateReport {
    let check = |name: &str, value: Option<f64>, threshold: f64, strict: bool| GateCheck {
        name: name.into(),
        value,
        threshold,
        comparison: if strict { ">" } else { ">=" }.into(),
        pass: value.is_some_and(|v| if strict { v > threshold } else { v >= threshold }),
    };
    let checks = vec![
        check("sensitivity", metrics.sensitivity, GATE_SENSITIVITY, false),
        check("specificity", metrics.specificity, GATE_SPECIFICITY, false),
        check("mean_warning_budget_s", mean_budget_s, GATE_BUDGET_S, true),
    ];
    GateReport { pass: checks.iter().all(|c| c.pass), checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn label(tier: Tier, severity: f64, ttc: f64) -> FrameLabel {
        FrameLabel {
            dangerous: tier != Tier::None,
            tier,
            severity: if tier == Tier::None { 0.0 } else { severity },
            ttc_s: if tier == Tier::None { f64::INFINITY } else { ttc },
            cpa_m: 1.0,
            pair: None,
        }
    }

    #[test]
    fn ten_frame_toy() {
        use State::*;
        let a = |s| label(Tier::Actionable, s, 3.0);
        let safe = label(Tier::None, 0.0, 0.0);
        let labels = [a(0.25), a(0.25), a(0.25), a(0.25), safe.clone(), safe.clone(), safe.clone(), safe.clone(), safe.clone(), safe];
        let states = [Alert, Alert, Warning, Alert, Alert, Safe, Safe, Warning, Idle, Safe];
        let m = compute_metrics(&states, &labels);
        assert!((m.sensitivity.unwrap() - 0.75).abs() < 1e-12);
        assert!((m.specificity.unwrap() - 5.0 / 6.0).abs() < 1e-12);
        assert!((m.sev_fn.unwrap() - 0.25).abs() < 1e-12);
        assert!((m.fatigue.unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn imminent_alerts_are_not_false_positives() {
        let labels = [label(Tier::Imminent, 0.5, 1.0), label(Tier::None, 0.0, 0.0)];
        let m = compute_metrics(&[State::Alert, State::Safe], &labels);
        assert_eq!(m.specificity, Some(1.0));
        assert_eq!(m.sensitivity, None);
        assert_eq!(m.sev_fn, None);
        assert_eq!(m.fatigue, Some(0.5));
    }

    #[test]
    fn all_actionable_alerted() {
        let labels = vec![label(Tier::Actionable, 0.3, 2.5); 5];
        let m = compute_metrics(&[State::Alert; 5], &labels);
        assert_eq!(m.sensitivity, Some(1.0));
        assert_eq!(m.sev_fn, Some(0.0));
        assert_eq!(m.specificity, None);
    }

    #[test]
    fn empty_run_is_undefined_not_zero() {
        assert_eq!(compute_metrics(&[], &[]), Metrics::default());
        let json = serde_json::to_value(Metrics::default()).unwrap();
        assert!(json["sensitivity"].is_null());
    }

    #[test]
    fn budget_counts_back_from_closest_approach() {
        let fps = 30.0;
        // actionable from frame 10 with the closest approach 3 s later, at frame 100
        let mut labels = vec![label(Tier::None, 0.0, 0.0); 10];
        labels.extend((10..120).map(|f| label(Tier::Actionable, 0.5, (100.0 - f as f64) / fps)));
        let mut states = vec![State::Warning; 120];
        assert_eq!(warning_budget(&states, &labels, fps), None);
        states[1] = State::Alert;
        assert!((warning_budget(&states, &labels, fps).unwrap() - 3.3).abs() < 1e-12);
        states[1] = State::Warning;
        states[100] = State::Alert;
        assert_eq!(warning_budget(&states, &labels, fps), Some(0.0));
        states[100] = State::Warning;
        states[101] = State::Alert;
        assert_eq!(warning_budget(&states, &labels, fps), None);
        assert_eq!(warning_budget(&states, &vec![label(Tier::None, 0.0, 0.0); 120], fps), None);
    }

    #[test]
    fn gates_are_exactly_the_conjunction() {
        let m = |s, p| Metrics { sensitivity: Some(s), specificity: Some(p), sev_fn: Some(0.0), fatigue: Some(0.1) };
        assert!(evaluate_gates(&m(0.9, 0.9), Some(1.88)).pass);
        assert!(!evaluate_gates(&m(0.899, 0.9), Some(3.0)).pass);
        assert!(!evaluate_gates(&m(0.95, 0.899), Some(3.0)).pass);
        assert!(!evaluate_gates(&m(0.95, 0.95), Some(1.87)).pass);
        assert!(!evaluate_gates(&m(0.95, 0.95), None).pass);
        assert!(!evaluate_gates(&Metrics::default(), Some(3.0)).pass);
    }

    fn arb_frame() -> impl Strategy<Value = (State, FrameLabel)> {
        let state = prop_oneof![Just(State::Idle), Just(State::Safe), Just(State::Warning), Just(State::Alert)];
        let tier = prop_oneof![Just(Tier::None), Just(Tier::Actionable), Just(Tier::Imminent)];
        (state, tier, 0.0f64..=1.0).prop_map(|(s, t, sev)| (s, label(t, sev, 2.0)))
    }

    proptest! {
        #[test]
        fn fatigue_bounds_actionable_alert_share(frames in proptest::collection::vec(arb_frame(), 1..200)) {
            let (states, labels): (Vec<_>, Vec<_>) = frames.into_iter().unzip();
            let c = Counts::tally(&states, &labels);
            let m = c.metrics();
            if let Some(s) = m.sensitivity {
                prop_assert!(m.fatigue.unwrap() + 1e-12 >= s * c.actionable as f64 / c.frames as f64);
            }
            for v in [m.sensitivity, m.specificity, m.sev_fn, m.fatigue].into_iter().flatten() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn merging_counts_matches_tallying_the_concatenation(
            a in proptest::collection::vec(arb_frame(), 0..50),
            b in proptest::collection::vec(arb_frame(), 0..50),
        ) {
            let (sa, la): (Vec<_>, Vec<_>) = a.into_iter().unzip();
            let (sb, lb): (Vec<_>, Vec<_>) = b.into_iter().unzip();
            let mut merged = Counts::tally(&sa, &la);
            merged += Counts::tally(&sb, &lb);
            let whole = Counts::tally(&[sa, sb].concat(), &[la, lb].concat());
            prop_assert_eq!(merged.actionable_alerted, whole.actionable_alerted);
            prop_assert_eq!(merged.safe_alerted, whole.safe_alerted);
            prop_assert!((merged.severity_missed - whole.severity_missed).abs() < 1e-9);
        }
    }
}
