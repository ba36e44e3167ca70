//! Scripted conformance scenarios, trajectory evaluation, world-to-camera
//! transforms and the clairvoyant kinematic ground-truth labeler.

mod suite;
mod trajectory;
mod truth;

pub use suite::{load_scenario, ManifestEntry, Suite, SuiteManifest};
pub use trajectory::{Interpolation, Trajectory};
pub use truth::{
    label_frames, pair_cpa, stopping_distance, swerve_time, FrameLabel, GroundTruthParams, Tier, GRAVITY,
};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::BoxDims;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing {path}: {source}")]
    Parse { path: String, source: serde_json::Error },
    #[error("invalid scenario {id}: {reason}")]
    Invalid { id: String, reason: String },
    #[error("unknown scenario {0}")]
    UnknownScenario(String),
    #[error("frame {frame} outside 0..{frames}")]
    FrameOutOfRange { frame: usize, frames: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentClass {
    Pedestrian,
    Wheelchair,
    Child,
    Cyclist,
    Ebike,
    Car,
}

impl AgentClass {
    /// Classes the decision logic and the labeler treat as the vulnerable party.
    pub fn is_pedestrian(self) -> bool {
        matches!(self, AgentClass::Pedestrian | AgentClass::Wheelchair | AgentClass::Child)
    }

    /// Classes that fill the cyclist memory and form the approaching party.
    pub fn is_cyclist(self) -> bool {
        matches!(self, AgentClass::Cyclist | AgentClass::Ebike)
    }

    pub fn default_dims(self) -> BoxDims {
        match self {
            AgentClass::Pedestrian => BoxDims::new(0.5, 0.5, 1.7),
            AgentClass::Wheelchair => BoxDims::new(1.1, 0.7, 1.3),
            AgentClass::Child => BoxDims::new(0.4, 0.4, 1.2),
            AgentClass::Cyclist | AgentClass::Ebike => BoxDims::new(1.8, 0.6, 1.8),
            AgentClass::Car => BoxDims::new(4.5, 1.8, 1.5),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AgentClass::Pedestrian => "pedestrian",
            AgentClass::Wheelchair => "wheelchair",
            AgentClass::Child => "child",
            AgentClass::Cyclist => "cyclist",
            AgentClass::Ebike => "ebike",
            AgentClass::Car => "car",
        }
    }
}

impl fmt::Display for AgentClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: String,
    pub class: AgentClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dims: Option<BoxDims>,
    #[serde(default)]
    pub interpolation: Interpolation,
    /// `[t, x, y]` in world metres and seconds.
    pub waypoints: Vec<[f64; 3]>,
    /// Time intervals during which no camera can detect this agent.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub occlusions: Vec<[f64; 2]>,
}

impl Agent {
    pub fn dims(&self) -> BoxDims {
        self.dims.unwrap_or_else(|| self.class.default_dims())
    }

    pub fn trajectory(&self) -> Trajectory<'_> {
        Trajectory { waypoints: &self.waypoints, interpolation: self.interpolation }
    }

    pub fn is_occluded(&self, t: f64) -> bool {
        self.occlusions.iter().any(|w| t >= w[0] && t < w[1])
    }

    fn validate(&self) -> Result<(), String> {
        if self.waypoints.len() < 2 {
            return Err(format!("agent {} needs at least 2 waypoints", self.id));
        }
        if self.waypoints.windows(2).any(|w| w[1][0] <= w[0][0]) {
            return Err(format!("agent {} waypoint times must be strictly increasing", self.id));
        }
        if self.waypoints.iter().flatten().any(|v| !v.is_finite()) {
            return Err(format!("agent {} has non-finite waypoint values", self.id));
        }
        if !self.dims().is_valid() {
            return Err(format!("agent {} has non-positive dims", self.id));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Safe,
    Standard,
    HighSpeed,
    Accessibility,
    MultiAgent,
    EdgeCase,
    Nonlinear,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Safe,
        Category::Standard,
        Category::HighSpeed,
        Category::Accessibility,
        Category::MultiAgent,
        Category::EdgeCase,
        Category::Nonlinear,
    ];
}

fn default_fps() -> f64 {
    30.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub category: Category,
    pub duration_s: f64,
    #[serde(default = "default_fps")]
    pub fps: f64,
    pub agents: Vec<Agent>,
}

/// True kinematic state of one agent at one frame, in world coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: String,
    pub class: AgentClass,
    pub dims: BoxDims,
    pub position: [f64; 2],
    pub velocity: [f64; 2],
    pub occluded: bool,
}

impl AgentState {
    pub fn speed(&self) -> f64 {
        self.velocity[0].hypot(self.velocity[1])
    }

    /// Yaw of the velocity vector; 0 when stationary.
    pub fn heading(&self) -> f64 {
        if self.speed() < 1e-9 {
            0.0
        } else {
            self.velocity[1].atan2(self.velocity[0])
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |reason: String| ScenarioError::Invalid { id: self.id.clone(), reason };
        if !(self.duration_s > 0.0) || !(self.fps > 0.0) {
            return Err(invalid("duration_s and fps must be positive".into()));
        }
        let mut ids = std::collections::BTreeSet::new();
        for a in &self.agents {
            a.validate().map_err(invalid)?;
            if !ids.insert(a.id.as_str()) {
                return Err(invalid(format!("duplicate agent id {}", a.id)));
            }
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        (self.duration_s * self.fps).round() as usize
    }

    pub fn time_of(&self, frame: usize) -> f64 {
        frame as f64 / self.fps
    }

    pub fn agent(&self, id: &str) -> Option<&Agent> {
        self.agents.iter().find(|a| a.id == id)
    }

    /// States of the agents whose waypoint span covers `frame`, in file order.
    pub fn positions_at(&self, frame: usize) -> Result<Vec<AgentState>, ScenarioError> {
        let frames = self.frame_count();
        if frame >= frames {
            return Err(ScenarioError::FrameOutOfRange { frame, frames });
        }
        let t = self.time_of(frame);
        let dt = 1.0 / self.fps;
        Ok(self
            .agents
            .iter()
            .filter(|a| a.trajectory().contains(t))
            .map(|a| {
                let tr = a.trajectory();
                AgentState {
                    id: a.id.clone(),
                    class: a.class,
                    dims: a.dims(),
                    position: tr.position(t),
                    velocity: tr.velocity(t, dt),
                    occluded: a.is_occluded(t),
                }
            })
            .collect())
    }
}

/// Planar camera placement in the world frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    pub x: f64,
    pub y: f64,
    pub yaw_deg: f64,
}

impl CameraPose {
    pub fn world_to_camera(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw_deg.to_radians().sin_cos();
        let (dx, dy) = (p[0] - self.x, p[1] - self.y);
        [c * dx + s * dy, -s * dx + c * dy]
    }

    pub fn camera_to_world(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw_deg.to_radians().sin_cos();
        [self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]]
    }

    pub fn rotate_to_camera(&self, v: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.yaw_deg.to_radians().sin_cos();
        [c * v[0] + s * v[1], -s * v[0] + c * v[1]]
    }
}

pub fn world_to_camera(pose: &CameraPose, p: [f64; 2]) -> [f64; 2] {
    pose.world_to_camera(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: [f64; 2], b: [f64; 2]) -> bool {
        (a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12
    }

    #[test]
    fn camera_transforms() {
        let p = [3.0, -2.0];
        assert!(close(world_to_camera(&CameraPose::default(), p), p));
        let shifted = CameraPose { x: 1.0, y: 1.0, yaw_deg: 0.0 };
        assert!(close(shifted.world_to_camera(p), [2.0, -3.0]));
        let turned = CameraPose { x: 0.0, y: 0.0, yaw_deg: 90.0 };
        assert!(close(turned.world_to_camera(p), [-2.0, -3.0]));
        let any = CameraPose { x: 2.5, y: -4.0, yaw_deg: 37.0 };
        assert!(close(any.camera_to_world(any.world_to_camera(p)), p));
    }

    fn two_agent_scenario() -> Scenario {
        serde_json::from_str(
            r#"{"id":"t","category":"standard","duration_s":2.0,
                "agents":[
                  {"id":"p","class":"pedestrian","waypoints":[[0,0,0],[2,2,0]]},
                  {"id":"c","class":"cyclist","waypoints":[[0.5,5,-5],[1.0,5,-2]],"occlusions":[[0.6,0.7]]}
                ]}"#,
        )
        .unwrap()
    }

    #[test]
    fn positions_follow_waypoints_and_lifetimes() {
        let s = two_agent_scenario();
        s.validate().unwrap();
        assert_eq!(s.fps, 30.0);
        assert_eq!(s.frame_count(), 60);
        let f0 = s.positions_at(0).unwrap();
        assert_eq!(f0.len(), 1);
        assert!(close(f0[0].position, [0.0, 0.0]));
        let f15 = s.positions_at(15).unwrap();
        assert_eq!(f15.len(), 2);
        assert!(close(f15[1].position, [5.0, -5.0]));
        assert!((f15[1].velocity[1] - 6.0).abs() < 1e-9);
        assert!(s.positions_at(19).unwrap()[1].occluded);
        assert!(s.positions_at(60).is_err());
        assert_eq!(s.agent("c").unwrap().dims(), AgentClass::Cyclist.default_dims());
    }

    #[test]
    fn validation_rejects_bad_waypoints() {
        let mut s = two_agent_scenario();
        s.agents[0].waypoints = vec![[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]];
        assert!(s.validate().is_err());
        let mut s = two_agent_scenario();
        s.agents[1].id = "p".into();
        assert!(s.validate().is_err());
    }

    #[test]
    fn class_roles() {
        assert!(AgentClass::Wheelchair.is_pedestrian() && AgentClass::Child.is_pedestrian());
        assert!(AgentClass::Ebike.is_cyclist());
        assert!(!AgentClass::Car.is_cyclist() && !AgentClass::Car.is_pedestrian());
    }
}
