//! The causal runtime: ground-plane tracker, speed estimation,
//! latency-compensating predictors, the three-stage decision rule and the
//! baseline rules.

mod pipeline;
mod rules;
mod tracker;

pub use pipeline::{Pipeline, PipelineConfig, TelemetryMessage, TelemetryObject, TELEMETRY_HISTORY};
pub use rules::{
    baseline_decide, decide, CyclistMemory, Decision, PipelineParams, Rule, State, TrackView, CLOSING_EPS_M,
    DISTANCE_ONLY_M, TTC_ALERT_S,
};
pub use tracker::{
    estimate_speed, predict, Detection, TrackedObject, Tracker, TrackerConfig, DEFAULT_GATE_M,
    DEFAULT_MAX_COAST_FRAMES, DEFAULT_SMOOTHING,
};
