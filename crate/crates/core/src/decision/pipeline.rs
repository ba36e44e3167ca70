use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::rules::{baseline_decide, CyclistMemory, Decision, PipelineParams, Rule, TrackView};
use super::tracker::{predict, Detection, Tracker, TrackerConfig};
use crate::scenario::AgentClass;

/// Telemetry keeps this many frames of history per object.
pub const TELEMETRY_HISTORY: usize = 30;
const MIN_PREDICTED_HISTORY: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub params: PipelineParams,
    pub rule: Rule,
    pub predictor_order: u8,
    /// Frames of camera latency the predictor compensates for.
    pub latency_frames: usize,
    pub fps: f64,
    pub tracker: TrackerConfig,
}

impl PipelineConfig {
    pub fn new(params: PipelineParams, rule: Rule) -> Self {
        PipelineConfig { params, rule, predictor_order: 1, latency_frames: 0, fps: 30.0, tracker: TrackerConfig::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetryObject {
    pub id: u32,
    pub class: AgentClass,
    pub pos: [f64; 2],
    /// m/s
    pub vel: [f64; 2],
    /// `[frame, x, y]`, oldest first.
    pub history: Vec<[f64; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetryMessage {
    pub ts: f64,
    pub frame: usize,
    pub objects: Vec<TelemetryObject>,
}

/// One causal decision stream: tracker, latency compensation, cyclist
/// memory and a decision rule.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub config: PipelineConfig,
    tracker: Tracker,
    memory: CyclistMemory,
    predicted: BTreeMap<u32, Vec<[f64; 2]>>,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Self {
        Pipeline { config, tracker: Tracker::new(config.tracker), memory: CyclistMemory::default(), predicted: BTreeMap::new() }
    }

    pub fn tracker(&self) -> &Tracker {
        &self.tracker
    }

    /// Latency-compensated position history the rules see for a track.
    pub fn predicted_history(&self, id: u32) -> Option<&[[f64; 2]]> {
        self.predicted.get(&id).map(Vec::as_slice)
    }

    pub fn step(&mut self, frame: usize, detections: &[Detection]) -> Decision {
        let cfg = self.config;
        self.tracker.update(frame, detections);
        if detections.iter().any(|d| d.class.is_cyclist()) {
            self.memory.record(frame);
        }

        let cap = MIN_PREDICTED_HISTORY.max(cfg.params.k_lookback + 1);
        let tracks = self.tracker.tracks();
        self.predicted.retain(|id, _| tracks.iter().any(|t| t.id == *id));
        for t in tracks {
            let h = self.predicted.entry(t.id).or_default();
            h.push(predict(t, cfg.latency_frames, cfg.predictor_order));
            if h.len() > cap {
                h.drain(..h.len() - cap);
            }
        }

        let views: Vec<TrackView> = tracks
            .iter()
            .map(|t| TrackView {
                id: t.id,
                class: t.class,
                history: &self.predicted[&t.id],
                velocity: [t.smoothed_velocity[0] * cfg.fps, t.smoothed_velocity[1] * cfg.fps],
            })
            .collect();
        let in_memory = self.memory.contains(frame, cfg.params.n_memory);
        baseline_decide(cfg.rule, &views, in_memory, &cfg.params)
    }

    pub fn telemetry(&self, frame: usize) -> TelemetryMessage {
        let fps = self.config.fps;
        TelemetryMessage {
            ts: frame as f64 / fps,
            frame,
            objects: self
                .tracker
                .tracks()
                .iter()
                .map(|t| {
                    let start = t.history.len().saturating_sub(TELEMETRY_HISTORY);
                    TelemetryObject {
                        id: t.id,
                        class: t.class,
                        pos: t.position(),
                        vel: [t.smoothed_velocity[0] * fps, t.smoothed_velocity[1] * fps],
                        history: t.history[start..].iter().map(|(f, p)| [*f as f64, p[0], p[1]]).collect(),
                    }
                })
                .collect(),
        }
    }
}
