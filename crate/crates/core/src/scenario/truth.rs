//! Clairvoyant kinematic ground truth: closing, closest point of approach,
//! stopping distance and time to collision from full trajectories.

use serde::{Deserialize, Serialize};

use super::{AgentClass, Scenario};
use crate::serde_util::inf_as_null;

pub const GRAVITY: f64 = 9.81;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthParams {
    pub cpa_radius_m: f64,
    pub stop_margin: f64,
    pub ttc_threshold_s: f64,
    pub t_react_s: f64,
    pub decel_mps2: f64,
    pub ebike_decel_mps2: f64,
    pub v_max_mps: f64,
    pub prt_distracted_s: f64,
}

impl Default for GroundTruthParams {
    fn default() -> Self {
        GroundTruthParams {
            cpa_radius_m: 5.0,
            stop_margin: 0.8,
            ttc_threshold_s: 3.0,
            t_react_s: 0.84,
            decel_mps2: 1.96,
            ebike_decel_mps2: 6.0,
            v_max_mps: 12.0,
            prt_distracted_s: 1.87,
        }
    }
}

impl GroundTruthParams {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            self.cpa_radius_m,
            self.stop_margin,
            self.ttc_threshold_s,
            self.t_react_s,
            self.decel_mps2,
            self.ebike_decel_mps2,
            self.v_max_mps,
            self.prt_distracted_s,
        ];
        if all.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err("ground-truth parameters must be positive and finite".into());
        }
        if self.stop_margin > 1.5 {
            return Err(format!("stop_margin {} outside (0, 1.5]", self.stop_margin));
        }
        Ok(())
    }

    pub fn decel_for(&self, class: AgentClass) -> f64 {
        if class == AgentClass::Ebike {
            self.ebike_decel_mps2
        } else {
            self.decel_mps2
        }
    }

    pub fn severity(&self, speed: f64) -> f64 {
        (speed * speed / (self.v_max_mps * self.v_max_mps)).min(1.0)
    }
}

/// Reaction distance plus braking distance at constant deceleration.
pub fn stopping_distance(speed: f64, t_react: f64, decel: f64) -> f64 {
    speed * t_react + speed * speed / (2.0 * decel)
}

/// Reaction time plus the time to clear lateral distance `w` at lateral
/// acceleration `mu * g`.
pub fn swerve_time(w: f64, mu: f64, t_react: f64) -> f64 {
    t_react + (2.0 * w / (mu * GRAVITY)).sqrt()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    #[default]
    None,
    Actionable,
    Imminent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameLabel {
    pub dangerous: bool,
    pub tier: Tier,
    pub severity: f64,
    #[serde(with = "inf_as_null")]
    pub ttc_s: f64,
    /// Closest approach of the labelled pair, or the smallest over all pairs
    /// when no pair is dangerous.
    #[serde(with = "inf_as_null")]
    pub cpa_m: f64,
    /// `(cyclist id, pedestrian id)`
    pub pair: Option<(String, String)>,
}

impl FrameLabel {
    fn safe(cpa_m: f64) -> Self {
        FrameLabel { dangerous: false, tier: Tier::None, severity: 0.0, ttc_s: f64::INFINITY, cpa_m, pair: None }
    }
}

struct PairTrack {
    cyclist: usize,
    pedestrian: usize,
    /// Pairwise gap per frame, `None` when either agent is absent.
    gap: Vec<Option<f64>>,
}

/// Minimum of `gap[from..]` and its frame index.
pub fn pair_cpa(gap: &[Option<f64>], from: usize) -> Option<(usize, f64)> {
    gap.iter()
        .enumerate()
        .skip(from)
        .filter_map(|(i, g)| g.map(|g| (i, g)))
        .fold(None, |best: Option<(usize, f64)>, (i, g)| match best {
            Some((_, b)) if b <= g => best,
            _ => Some((i, g)),
        })
}

/// Per-frame labels. Among dangerous pairs the frame takes the one with the
/// smallest TTC, then the larger severity, then `(cyclist, pedestrian)` order.
pub fn label_frames(s: &Scenario, gt: &GroundTruthParams) -> Vec<FrameLabel> {
    let frames = s.frame_count();
    let dt = 1.0 / s.fps;
    let present = |agent: usize, f: usize| s.agents[agent].trajectory().contains(s.time_of(f));
    let position = |agent: usize, f: usize| s.agents[agent].trajectory().position(s.time_of(f));

    let mut cyclists: Vec<usize> = (0..s.agents.len()).filter(|&i| s.agents[i].class.is_cyclist()).collect();
    let mut pedestrians: Vec<usize> = (0..s.agents.len()).filter(|&i| s.agents[i].class.is_pedestrian()).collect();
    cyclists.sort_by(|a, b| s.agents[*a].id.cmp(&s.agents[*b].id));
    pedestrians.sort_by(|a, b| s.agents[*a].id.cmp(&s.agents[*b].id));

    let pairs: Vec<PairTrack> = cyclists
        .iter()
        .flat_map(|&c| pedestrians.iter().map(move |&p| (c, p)))
        .map(|(c, p)| PairTrack {
            cyclist: c,
            pedestrian: p,
            gap: (0..frames)
                .map(|f| {
                    (present(c, f) && present(p, f)).then(|| {
                        let (a, b) = (position(c, f), position(p, f));
                        (a[0] - b[0]).hypot(a[1] - b[1])
                    })
                })
                .collect(),
        })
        .collect();

    (0..frames)
        .map(|f| {
            let mut best: Option<FrameLabel> = None;
            let mut min_cpa = f64::INFINITY;
            for pair in &pairs {
                let Some(gap) = pair.gap[f] else { continue };
                let Some((cpa_frame, cpa)) = pair_cpa(&pair.gap, f) else { continue };
                min_cpa = min_cpa.min(cpa);
                let closing = matches!(pair.gap.get(f + 1), Some(Some(next)) if *next < gap);
                if !closing || cpa > gt.cpa_radius_m {
                    continue;
                }
                let ttc = (cpa_frame - f) as f64 * dt;
                let agent = &s.agents[pair.cyclist];
                let v = agent.trajectory().velocity(s.time_of(f), dt);
                let speed = v[0].hypot(v[1]);
                let d_stop = stopping_distance(speed, gt.t_react_s, gt.decel_for(agent.class));
                if !(d_stop > gt.stop_margin * gap || ttc < gt.ttc_threshold_s) {
                    continue;
                }
                let label = FrameLabel {
                    dangerous: true,
                    tier: if ttc >= gt.prt_distracted_s { Tier::Actionable } else { Tier::Imminent },
                    severity: gt.severity(speed),
                    ttc_s: ttc,
                    cpa_m: cpa,
                    pair: Some((agent.id.clone(), s.agents[pair.pedestrian].id.clone())),
                };
                let worse = match &best {
                    None => true,
                    Some(b) => label.ttc_s < b.ttc_s || (label.ttc_s == b.ttc_s && label.severity > b.severity),
                };
                if worse {
                    best = Some(label);
                }
            }
            best.unwrap_or_else(|| FrameLabel::safe(min_cpa))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Agent, Category, Interpolation};

    fn agent(id: &str, class: AgentClass, waypoints: Vec<[f64; 3]>) -> Agent {
        Agent { id: id.into(), class, dims: None, interpolation: Interpolation::Linear, waypoints, occlusions: vec![] }
    }

    fn scenario(agents: Vec<Agent>, duration_s: f64) -> Scenario {
        Scenario {
            id: "t".into(),
            name: String::new(),
            description: String::new(),
            category: Category::Standard,
            duration_s,
            fps: 30.0,
            agents,
        }
    }

    #[test]
    fn stopping_distances() {
        assert!((stopping_distance(8.33, 0.84, 1.96) - 24.7).abs() < 0.05);
        assert!((stopping_distance(8.33, 2.5, 3.4) - 31.0).abs() < 0.05);
        assert_eq!(stopping_distance(0.0, 0.84, 1.96), 0.0);
    }

    #[test]
    fn swerve_times() {
        let total = swerve_time(1.0, 0.4, 0.84);
        assert!((total - 0.84 - 0.714).abs() < 1e-3);
        assert!((total - 1.55).abs() < 0.01);
        assert!((swerve_time(1e-12, 0.4, 0.84) - 0.84).abs() < 1e-6);
        let m1 = swerve_time(1.0, 0.4, 0.0);
        let m2 = swerve_time(1.0, 0.8, 0.0);
        assert!((m1 / m2 - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn severity_formula_and_monotonicity() {
        let gt = GroundTruthParams::default();
        assert_eq!(gt.severity(12.0), 1.0);
        assert!((gt.severity(6.0) - 0.25).abs() < 1e-12);
        let doubled = GroundTruthParams { v_max_mps: 24.0, ..gt };
        for v in [0.0, 1.0, 6.0, 12.0, 30.0] {
            assert!(doubled.severity(v) <= gt.severity(v));
        }
    }

    #[test]
    fn stationary_cyclist_is_never_dangerous() {
        let s = scenario(
            vec![
                agent("c", AgentClass::Cyclist, vec![[0.0, 3.0, 0.0], [5.0, 3.0, 0.0]]),
                agent("p", AgentClass::Pedestrian, vec![[0.0, 3.0, 2.0], [5.0, 3.0, 2.0]]),
            ],
            5.0,
        );
        assert!(label_frames(&s, &GroundTruthParams::default()).iter().all(|l| !l.dangerous));
    }

    #[test]
    fn head_on_approach_has_both_tiers() {
        // cyclist at 5 m/s reaches the standing pedestrian at t = 6 s
        let s = scenario(
            vec![
                agent("c", AgentClass::Cyclist, vec![[0.0, 5.0, -30.0], [8.0, 5.0, 10.0]]),
                agent("p", AgentClass::Pedestrian, vec![[0.0, 5.0, 0.0], [8.0, 5.0, 0.0]]),
            ],
            8.0,
        );
        let gt = GroundTruthParams::default();
        let labels = label_frames(&s, &gt);
        for (f, l) in labels.iter().enumerate() {
            assert_eq!(l.tier != Tier::None, l.dangerous);
            assert_eq!(l.tier == Tier::Imminent, l.dangerous && l.ttc_s < gt.prt_distracted_s, "frame {f}");
            if !l.dangerous {
                assert_eq!(l.severity, 0.0);
            }
        }
        // ttc < 3 s from frame 91; the stopping-distance test would only trigger at frame 101
        let first = labels.iter().position(|l| l.dangerous).unwrap();
        assert_eq!(first, 91);
        assert!((labels[first].severity - 25.0 / 144.0).abs() < 1e-9);
        assert_eq!(labels[first].pair, Some(("c".into(), "p".into())));
        assert_eq!(labels[first].tier, Tier::Actionable);
        assert!((labels[150].ttc_s - 1.0).abs() < 1e-9);
        assert_eq!(labels[150].tier, Tier::Imminent);
        // at and after the crossing the cyclist is receding
        assert!(labels[180..].iter().all(|l| !l.dangerous));
    }

    #[test]
    fn pair_order_does_not_change_labels() {
        let mut agents = vec![
            agent("c1", AgentClass::Cyclist, vec![[0.0, 5.0, -30.0], [8.0, 5.0, 10.0]]),
            agent("c2", AgentClass::Ebike, vec![[0.0, 3.0, 30.0], [8.0, 3.0, -20.0]]),
            agent("p", AgentClass::Pedestrian, vec![[0.0, 0.0, 0.0], [8.0, 8.0, 0.0]]),
            agent("car", AgentClass::Car, vec![[0.0, 4.0, -10.0], [8.0, 4.0, 40.0]]),
        ];
        let gt = GroundTruthParams::default();
        let a = label_frames(&scenario(agents.clone(), 8.0), &gt);
        agents.reverse();
        let b = label_frames(&scenario(agents, 8.0), &gt);
        assert_eq!(a, b);
        assert!(a.iter().any(|l| l.dangerous));
        assert!(a.iter().all(|l| l.pair.as_ref().is_none_or(|p| p.0 != "car")));
    }

    #[test]
    fn labels_serialize_infinite_ttc_as_null() {
        let json = serde_json::to_string(&FrameLabel::safe(f64::INFINITY)).unwrap();
        assert!(json.contains("\"ttc_s\":null"));
        let back: FrameLabel = serde_json::from_str(&json).unwrap();
        assert!(back.ttc_s.is_infinite());
    }
}
