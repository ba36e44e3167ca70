//! What the pipeline gets to see: fisheye localization error, size-aware
//! stochastic dropout, occlusion windows, multi-camera fusion and latency.

mod recall;

pub use recall::{fused_probability, RecallCurve};

use std::collections::{BTreeMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{localize_box, Box3D, CameraModel};
use crate::scenario::{AgentClass, AgentState, CameraPose};

/// Detector input resolution used to scale projected box areas.
pub const DETECTOR_INPUT_PX: f64 = 1280.0;
pub const MAX_LATENCY_FRAMES: usize = 15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorCamera {
    pub pose: CameraPose,
    pub model: CameraModel,
}

impl SensorCamera {
    pub fn new(pose: CameraPose, model: CameraModel) -> Self {
        SensorCamera { pose, model }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorConfig {
    pub apply_loc_error: bool,
    pub stochastic: bool,
    pub curve: RecallCurve,
    pub latency_frames: usize,
    /// The first camera defines the coordinate frame the pipeline works in.
    pub cameras: Vec<SensorCamera>,
    /// Extra occlusion intervals per agent id, on top of those in the scenario.
    #[serde(default)]
    pub occlusion_windows: BTreeMap<String, Vec<[f64; 2]>>,
    /// Multiplies every miss probability `1 - AR`, clamped to [0, 1].
    #[serde(default = "one")]
    pub dropout_scale: f64,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl SensorConfig {
    /// Deterministic sensing through one camera at the world origin.
    pub fn deterministic(camera: SensorCamera, apply_loc_error: bool) -> Self {
        SensorConfig {
            apply_loc_error,
            stochastic: false,
            curve: RecallCurve::bundled(),
            latency_frames: 0,
            cameras: vec![camera],
            occlusion_windows: BTreeMap::new(),
            dropout_scale: 1.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.cameras.is_empty() {
            return Err("sensor config needs at least one camera".into());
        }
        if self.latency_frames > MAX_LATENCY_FRAMES {
            return Err(format!("latency_frames {} exceeds {MAX_LATENCY_FRAMES}", self.latency_frames));
        }
        if !(self.dropout_scale >= 0.0) {
            return Err(format!("dropout_scale must be >= 0, got {}", self.dropout_scale));
        }
        for c in &self.cameras {
            c.model.validate().map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    pub fn primary(&self) -> &SensorCamera {
        &self.cameras[0]
    }

    fn occluded(&self, agent: &AgentState, t: f64) -> bool {
        agent.occluded
            || self.occlusion_windows.get(&agent.id).is_some_and(|ws| ws.iter().any(|w| t >= w[0] && t < w[1]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub frame: usize,
    pub agent_id: String,
    pub class: AgentClass,
    /// True ground position in the primary camera frame.
    pub true_xy: [f64; 2],
    pub observed_xy: Option<[f64; 2]>,
    pub detected: bool,
    pub localization_error_m: f64,
    pub camera: Option<usize>,
    pub detection_prob: f64,
}

/// What one camera makes of one agent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraView {
    pub area_px2: f64,
    pub recall: f64,
    pub observed_world: [f64; 2],
    pub error_m: f64,
}

pub fn camera_view(cam: &SensorCamera, agent: &AgentState, curve: &RecallCurve) -> Option<CameraView> {
    let center = cam.pose.world_to_camera(agent.position);
    let v = cam.pose.rotate_to_camera(agent.velocity);
    let heading = if v[0].hypot(v[1]) < 1e-9 { 0.0 } else { v[1].atan2(v[0]) };
    let loc = localize_box(&cam.model, &Box3D::new(center, agent.dims, heading)).ok()?;
    let [w, h] = cam.model.crop_size.map(|d| d as f64);
    let clip_w = loc.rect.max[0].min(w) - loc.rect.min[0].max(0.0);
    let clip_h = loc.rect.max[1].min(h) - loc.rect.min[1].max(0.0);
    if clip_w <= 0.0 || clip_h <= 0.0 {
        return None;
    }
    let area_px2 = clip_w * clip_h * (DETECTOR_INPUT_PX / w) * (DETECTOR_INPUT_PX / h);
    Some(CameraView {
        area_px2,
        recall: curve.recall(area_px2),
        observed_world: cam.pose.camera_to_world(loc.observed),
        error_m: loc.error_m,
    })
}

/// Uniform draw for one (trial, camera, agent, frame) cell. Each
/// (trial, camera, agent) triple owns a ChaCha stream and the frame indexes
/// into it, so draws do not depend on evaluation order.
pub fn uniform_draw(seed: u64, trial: u32, camera: usize, agent: usize, frame: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((trial as u64) << 32) | ((camera as u64 & 0xff) << 24) | (agent as u64 & 0xff_ffff));
    rng.set_word_pos(frame as u128 * 2);
    rng.random::<f64>()
}

/// Observations of every agent in `states` at `frame`. `agent_index` gives the
/// stable per-scenario index used to select random streams.
pub fn observe(
    frame: usize,
    t: f64,
    states: &[(usize, AgentState)],
    cfg: &SensorConfig,
    trial: u32,
) -> Vec<Observation> {
    let primary = cfg.primary();
    states
        .iter()
        .map(|(agent_index, agent)| {
            let true_xy = primary.pose.world_to_camera(agent.position);
            let mut obs = Observation {
                frame,
                agent_id: agent.id.clone(),
                class: agent.class,
                true_xy,
                observed_xy: None,
                detected: false,
                localization_error_m: 0.0,
                camera: None,
                detection_prob: 0.0,
            };
            if cfg.occluded(agent, t) {
                return obs;
            }
            let views: Vec<Option<CameraView>> = cfg.cameras.iter().map(|c| camera_view(c, agent, &cfg.curve)).collect();
            let probs: Vec<f64> = views
                .iter()
                .map(|v| v.map_or(0.0, |v| 1.0 - ((1.0 - v.recall) * cfg.dropout_scale).min(1.0)))
                .collect();
            obs.detection_prob = if cfg.stochastic { fused_probability(&probs) } else if views.iter().any(Option::is_some) { 1.0 } else { 0.0 };

            let mut best: Option<(usize, CameraView)> = None;
            for (i, view) in views.iter().enumerate() {
                let Some(view) = view else { continue };
                let fires = !cfg.stochastic || uniform_draw(cfg.seed, trial, i, *agent_index, frame) < probs[i];
                if fires && best.is_none_or(|(_, b)| view.error_m < b.error_m) {
                    best = Some((i, *view));
                }
            }
            if let Some((i, view)) = best {
                obs.detected = true;
                obs.camera = Some(i);
                if cfg.apply_loc_error {
                    obs.observed_xy = Some(primary.pose.world_to_camera(view.observed_world));
                    obs.localization_error_m = view.error_m;
                } else {
                    obs.observed_xy = Some(true_xy);
                }
            }
            obs
        })
        .collect()
}

/// Fixed-length FIFO: each push returns the item pushed `latency` calls ago.
#[derive(Clone, Debug)]
pub struct DelayLine<T> {
    latency: usize,
    queue: VecDeque<T>,
}

impl<T> DelayLine<T> {
    pub fn new(latency: usize) -> Self {
        DelayLine { latency, queue: VecDeque::with_capacity(latency + 1) }
    }

    pub fn push(&mut self, item: T) -> Option<T> {
        self.queue.push_back(item);
        if self.queue.len() > self.latency {
            self.queue.pop_front()
        } else {
            None
        }
    }
}

/// Frame `t` of the output carries the observations of frame `t - latency`;
/// the first `latency` frames are empty.
pub fn delay_buffer(stream: Vec<Vec<Observation>>, latency: usize) -> Vec<Vec<Observation>> {
    let mut line = DelayLine::new(latency);
    stream.into_iter().map(|frame| line.push(frame).unwrap_or_default()).collect()
}
