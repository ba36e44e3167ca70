//! The three-stage decision rule and the baseline rules it is compared with.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::scenario::AgentClass;

pub const DISTANCE_ONLY_M: f64 = 10.0;
pub const TTC_ALERT_S: f64 = 3.0;
/// A gap must shrink by more than this to count as closing, so that float
/// rounding on a constant gap is not read as an approach.
pub const CLOSING_EPS_M: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    /// Cyclist memory length in frames.
    pub n_memory: usize,
    pub d_min: f64,
    pub d_max: f64,
    /// Minimum cyclist displacement over the lookback, in metres.
    pub delta_min: f64,
    /// Lookback depth in frames.
    pub k_lookback: usize,
}

impl PipelineParams {
    pub const SELECTED: PipelineParams =
        PipelineParams { n_memory: 58, d_min: 1.9, d_max: 24.8, delta_min: 0.147, k_lookback: 2 };

    pub fn validate(&self) -> Result<(), String> {
        if !(self.d_min > 0.0 && self.d_min < self.d_max) {
            return Err(format!("need 0 < d_min < d_max, got [{}, {}]", self.d_min, self.d_max));
        }
        if self.n_memory < 1 || self.k_lookback < 1 {
            return Err("n_memory and k_lookback must be >= 1".into());
        }
        if !(self.delta_min >= 0.0) {
            return Err(format!("delta_min must be >= 0, got {}", self.delta_min));
        }
        Ok(())
    }
}

impl Default for PipelineParams {
    fn default() -> Self {
        PipelineParams::SELECTED
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum State {
    Idle,
    Safe,
    Warning,
    Alert,
}

impl State {
    pub fn name(self) -> &'static str {
        match self {
            State::Idle => "IDLE",
            State::Safe => "SAFE",
            State::Warning => "WARNING",
            State::Alert => "ALERT",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decision {
    pub state: State,
    /// `(cyclist track id, pedestrian track id)`, present only for ALERT.
    pub pair: Option<(u32, u32)>,
}

impl Decision {
    pub const fn of(state: State) -> Self {
        Decision { state, pair: None }
    }

    fn alert(c: u32, p: u32) -> Self {
        Decision { state: State::Alert, pair: Some((c, p)) }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    #[default]
    Pairwise,
    DistanceOnly,
    NaiveClosing,
    Ttc,
}

impl Rule {
    pub const ALL: [Rule; 4] = [Rule::DistanceOnly, Rule::NaiveClosing, Rule::Ttc, Rule::Pairwise];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Pairwise => "pairwise",
            Rule::DistanceOnly => "distance_only",
            Rule::NaiveClosing => "naive_closing",
            Rule::Ttc => "ttc",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Rule::ALL.into_iter().find(|r| r.name() == s).ok_or_else(|| format!("unknown rule {s}"))
    }
}

/// What the rules see of one track.
#[derive(Clone, Copy, Debug)]
pub struct TrackView<'a> {
    pub id: u32,
    pub class: AgentClass,
    /// One position per frame, oldest first; the last entry is the current frame.
    pub history: &'a [[f64; 2]],
    /// Smoothed velocity in m/s.
    pub velocity: [f64; 2],
}

impl TrackView<'_> {
    fn now(&self) -> [f64; 2] {
        self.history[self.history.len() - 1]
    }

    fn back(&self, k: usize) -> Option<[f64; 2]> {
        (self.history.len() > k).then(|| self.history[self.history.len() - 1 - k])
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Cyclist-by-pedestrian pairs in `(cyclist id, pedestrian id)` order, or the
/// stage-1/2 verdict when the pair loop is not reached.
fn pairs<'a, 'b>(
    tracks: &'b [TrackView<'a>],
    cyclist_in_memory: bool,
) -> Result<Vec<(&'b TrackView<'a>, &'b TrackView<'a>)>, Decision> {
    let mut peds: Vec<&TrackView> = tracks.iter().filter(|t| t.class.is_pedestrian()).collect();
    if peds.is_empty() {
        return Err(Decision::of(State::Idle));
    }
    if !cyclist_in_memory {
        return Err(Decision::of(State::Safe));
    }
    let mut cyclists: Vec<&TrackView> = tracks.iter().filter(|t| t.class.is_cyclist()).collect();
    cyclists.sort_by_key(|t| t.id);
    peds.sort_by_key(|t| t.id);
    Ok(cyclists.iter().flat_map(|c| peds.iter().map(move |p| (*c, *p))).collect())
}

/// Pairwise historical closing check: both agents' positions now and `k`
/// frames ago.
pub fn decide(tracks: &[TrackView], cyclist_in_memory: bool, params: &PipelineParams) -> Decision {
    let pairs = match pairs(tracks, cyclist_in_memory) {
        Ok(p) => p,
        Err(d) => return d,
    };
    let k = params.k_lookback;
    for (c, p) in pairs {
        let (Some(c_then), Some(p_then)) = (c.back(k), p.back(k)) else { continue };
        let d_t = dist(c.now(), p.now());
        if d_t < params.d_min || d_t > params.d_max {
            continue;
        }
        if d_t < dist(c_then, p_then) - CLOSING_EPS_M && dist(c.now(), c_then) > params.delta_min {
            return Decision::alert(c.id, p.id);
        }
    }
    Decision::of(State::Warning)
}

pub fn baseline_decide(rule: Rule, tracks: &[TrackView], cyclist_in_memory: bool, params: &PipelineParams) -> Decision {
    if rule == Rule::Pairwise {
        return decide(tracks, cyclist_in_memory, params);
    }
    let pairs = match pairs(tracks, cyclist_in_memory) {
        Ok(p) => p,
        Err(d) => return d,
    };
    let k = params.k_lookback;
    for (c, p) in pairs {
        let d_t = dist(c.now(), p.now());
        let fires = match rule {
            Rule::DistanceOnly => d_t < DISTANCE_ONLY_M,
            Rule::NaiveClosing => match c.back(k) {
                Some(c_then) if p.history.len() > k && (params.d_min..=params.d_max).contains(&d_t) => {
                    dist(c_then, p.now()) > d_t + CLOSING_EPS_M && dist(c.now(), c_then) > params.delta_min
                }
                _ => false,
            },
            Rule::Ttc => {
                let r = [c.now()[0] - p.now()[0], c.now()[1] - p.now()[1]];
                let w = [c.velocity[0] - p.velocity[0], c.velocity[1] - p.velocity[1]];
                let closing = -(r[0] * w[0] + r[1] * w[1]) / d_t.max(1e-9);
                closing > 0.0 && d_t / closing < TTC_ALERT_S
            }
            Rule::Pairwise => unreachable!(),
        };
        if fires {
            return Decision::alert(c.id, p.id);
        }
    }
    Decision::of(State::Warning)
}

/// Whether a cyclist detection arrived within the last `n` frames.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CyclistMemory {
    last_detection: Option<usize>,
}

impl CyclistMemory {
    pub fn record(&mut self, frame: usize) {
        self.last_detection = Some(self.last_detection.map_or(frame, |f| f.max(frame)));
    }

    pub fn contains(&self, frame: usize, n: usize) -> bool {
        self.last_detection.is_some_and(|f| f <= frame && frame - f < n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn straight(x0: f64, y0: f64, vx: f64, vy: f64, frames: usize) -> Vec<[f64; 2]> {
        (0..frames).map(|f| [x0 + vx * f as f64 / 30.0, y0 + vy * f as f64 / 30.0]).collect()
    }

    fn view(id: u32, class: AgentClass, history: &[[f64; 2]], velocity: [f64; 2]) -> TrackView<'_> {
        TrackView { id, class, history, velocity }
    }

    const P: PipelineParams = PipelineParams::SELECTED;

    #[test]
    fn no_pedestrian_is_idle() {
        let c = straight(0.0, 0.0, 5.0, 0.0, 10);
        let tracks = [view(0, AgentClass::Cyclist, &c, [5.0, 0.0])];
        assert_eq!(decide(&tracks, true, &P).state, State::Idle);
        assert_eq!(decide(&[], false, &P).state, State::Idle);
    }

    #[test]
    fn pedestrian_without_cyclist_memory_is_safe() {
        let p = straight(5.0, 0.0, 0.0, 0.0, 10);
        let tracks = [view(0, AgentClass::Pedestrian, &p, [0.0, 0.0])];
        assert_eq!(decide(&tracks, false, &P).state, State::Safe);
    }

    #[test]
    fn head_on_cyclist_alerts() {
        // gap 10 m now, closing at 5 m/s: 0.333 m over two frames
        let c = straight(-10.0 - 5.0 * 9.0 / 30.0, 0.0, 5.0, 0.0, 10);
        let p = straight(0.0, 0.0, 0.0, 0.0, 10);
        let tracks = [view(3, AgentClass::Cyclist, &c, [5.0, 0.0]), view(7, AgentClass::Pedestrian, &p, [0.0, 0.0])];
        assert!((dist(c[9], p[9]) - 10.0).abs() < 1e-9);
        assert_eq!(decide(&tracks, true, &P), Decision { state: State::Alert, pair: Some((3, 7)) });
    }

    #[test]
    fn co_directional_equal_speed_is_warning() {
        let c = straight(0.0, 0.0, 2.0, 0.0, 10);
        let p = straight(5.0, 0.0, 2.0, 0.0, 10);
        let tracks = [view(0, AgentClass::Cyclist, &c, [2.0, 0.0]), view(1, AgentClass::Pedestrian, &p, [2.0, 0.0])];
        assert_eq!(decide(&tracks, true, &P).state, State::Warning);
    }

    #[test]
    fn naive_closing_counterexample() {
        // 3 m/s moves 0.2 m over two frames, above the 0.147 m displacement gate
        let c = straight(0.0, 0.0, 3.0, 0.0, 10);
        let p = straight(5.0, 0.0, 3.0, 0.0, 10);
        let tracks = [view(0, AgentClass::Cyclist, &c, [3.0, 0.0]), view(1, AgentClass::Pedestrian, &p, [3.0, 0.0])];
        assert!((dist(c[7], p[9]) - 5.2).abs() < 1e-9);
        assert_eq!(baseline_decide(Rule::NaiveClosing, &tracks, true, &P).state, State::Alert);
        assert_eq!(baseline_decide(Rule::Pairwise, &tracks, true, &P).state, State::Warning);
        // at 2 m/s the naive distance is 5.133 m but the displacement gate holds it back
        let c2 = straight(0.0, 0.0, 2.0, 0.0, 10);
        let p2 = straight(5.0, 0.0, 2.0, 0.0, 10);
        assert!((dist(c2[7], p2[9]) - 5.1333).abs() < 1e-3);
        let slow = [view(0, AgentClass::Cyclist, &c2, [2.0, 0.0]), view(1, AgentClass::Pedestrian, &p2, [2.0, 0.0])];
        let no_gate = PipelineParams { delta_min: 0.1, ..P };
        assert_eq!(baseline_decide(Rule::NaiveClosing, &slow, true, &no_gate).state, State::Alert);
        assert_eq!(decide(&slow, true, &no_gate).state, State::Warning);
    }

    #[test]
    fn stationary_pair_at_nine_metres() {
        let c = straight(9.0, 0.0, 0.0, 0.0, 10);
        let p = straight(0.0, 0.0, 0.0, 0.0, 10);
        let tracks = [view(0, AgentClass::Cyclist, &c, [0.0, 0.0]), view(1, AgentClass::Pedestrian, &p, [0.0, 0.0])];
        assert_eq!(baseline_decide(Rule::DistanceOnly, &tracks, true, &P).state, State::Alert);
        for rule in [Rule::NaiveClosing, Rule::Ttc, Rule::Pairwise] {
            assert_eq!(baseline_decide(rule, &tracks, true, &P).state, State::Warning, "{rule}");
        }
    }

    #[test]
    fn ttc_rule_head_on() {
        let c = straight(-12.0, 0.0, 6.0, 0.0, 1);
        let p = straight(0.0, 0.0, 0.0, 0.0, 1);
        let tracks = [view(0, AgentClass::Cyclist, &c, [6.0, 0.0]), view(1, AgentClass::Pedestrian, &p, [0.0, 0.0])];
        assert_eq!(baseline_decide(Rule::Ttc, &tracks, true, &P).state, State::Alert);
        let slow = [view(0, AgentClass::Cyclist, &c, [3.9, 0.0]), view(1, AgentClass::Pedestrian, &p, [0.0, 0.0])];
        assert_eq!(baseline_decide(Rule::Ttc, &slow, true, &P).state, State::Warning);
    }

    #[test]
    fn short_histories_do_not_alert() {
        let c = straight(-10.0, 0.0, 5.0, 0.0, 2);
        let p = straight(0.0, 0.0, 0.0, 0.0, 2);
        let tracks = [view(0, AgentClass::Cyclist, &c, [5.0, 0.0]), view(1, AgentClass::Pedestrian, &p, [0.0, 0.0])];
        assert_eq!(decide(&tracks, true, &P).state, State::Warning);
    }

    #[test]
    fn cyclist_memory_window() {
        let mut m = CyclistMemory::default();
        assert!(!m.contains(0, 58));
        m.record(10);
        assert!(m.contains(10, 58) && m.contains(67, 58));
        assert!(!m.contains(68, 58));
        assert!(!m.contains(11, 1));
    }

    proptest! {
        #[test]
        fn co_directional_constant_gap_never_alerts_pairwise(
            gap in 2.0f64..24.0,
            speed in 2.3f64..12.0,
            heading in 0.0f64..std::f64::consts::TAU,
            offset in -2.0f64..2.0,
        ) {
            let (s, c) = heading.sin_cos();
            let (vx, vy) = (speed * c, speed * s);
            let cy = straight(offset, 0.0, vx, vy, 6);
            let pe = straight(offset + gap * c, gap * s, vx, vy, 6);
            let tracks = [view(0, AgentClass::Cyclist, &cy, [vx, vy]), view(1, AgentClass::Pedestrian, &pe, [vx, vy])];
            prop_assert_ne!(decide(&tracks, true, &P).state, State::Alert);
            prop_assert_eq!(baseline_decide(Rule::NaiveClosing, &tracks, true, &P).state, State::Alert);
        }

        #[test]
        fn translation_leaves_decisions_unchanged(
            dx in -50.0f64..50.0, dy in -50.0f64..50.0,
            cx in -20.0f64..0.0, vx in 0.0f64..10.0, py in -3.0f64..3.0,
        ) {
            let c = straight(cx, 0.0, vx, 0.0, 5);
            let p = straight(0.0, py, 0.0, 0.0, 5);
            let shift = |h: &[[f64; 2]]| h.iter().map(|q| [q[0] + dx, q[1] + dy]).collect::<Vec<_>>();
            let (cs, ps) = (shift(&c), shift(&p));
            let a = [view(0, AgentClass::Cyclist, &c, [vx, 0.0]), view(1, AgentClass::Pedestrian, &p, [0.0, 0.0])];
            let b = [view(0, AgentClass::Cyclist, &cs, [vx, 0.0]), view(1, AgentClass::Pedestrian, &ps, [0.0, 0.0])];
            for rule in Rule::ALL {
                prop_assert_eq!(
                    baseline_decide(rule, &a, true, &P).state,
                    baseline_decide(rule, &b, true, &P).state
                );
            }
        }

        #[test]
        fn widening_the_window_keeps_alerts(
            cx in -30.0f64..0.0, vx in 0.0f64..10.0, py in -3.0f64..3.0,
            shrink_lo in 0.0f64..1.5, grow_hi in 0.0f64..10.0,
        ) {
            let c = straight(cx, 0.0, vx, 0.0, 5);
            let p = straight(0.0, py, 0.0, 0.0, 5);
            let tracks = [view(0, AgentClass::Cyclist, &c, [vx, 0.0]), view(1, AgentClass::Pedestrian, &p, [0.0, 0.0])];
            let wide = PipelineParams { d_min: P.d_min - shrink_lo, d_max: P.d_max + grow_hi, ..P };
            if decide(&tracks, true, &P).state == State::Alert {
                prop_assert_eq!(decide(&tracks, true, &wide).state, State::Alert);
            }
        }
    }
}
