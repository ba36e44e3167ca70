use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use super::run::{evaluate, prepare_suite, DecisionSettings, EvalReport, Provenance, RunConfig};
use super::EvalError;
use crate::decision::{PipelineParams, Rule};
use crate::scenario::{GroundTruthParams, Suite};
use crate::sensor::MAX_LATENCY_FRAMES;

/// Named parameter sets compared in the configuration table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    NarrowWindow,
    Conservative,
    SpeedAdaptive,
    Selected,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::NarrowWindow, Preset::Conservative, Preset::SpeedAdaptive, Preset::Selected];

    pub fn params(self) -> PipelineParams {
        let s = PipelineParams::SELECTED;
        match self {
            Preset::NarrowWindow => PipelineParams { d_max: 10.0, ..s },
            // short memory, long lookback and a large displacement gate
            Preset::Conservative => PipelineParams { n_memory: 30, d_min: 2.5, d_max: 15.0, delta_min: 0.6, k_lookback: 4 },
            // window sized to the braking distance of a fast cyclist with design-manual values
            Preset::SpeedAdaptive => PipelineParams { n_memory: 45, d_min: 1.5, d_max: 31.0, delta_min: 0.2, k_lookback: 3 },
            Preset::Selected => s,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::NarrowWindow => "narrow_window",
            Preset::Conservative => "conservative",
            Preset::SpeedAdaptive => "speed_adaptive",
            Preset::Selected => "selected",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| format!("unknown preset {s}"))
    }
}

/// Every preset evaluated against the same sensing.
pub fn compare_presets(suite: &Suite, cfg: &RunConfig, provenance: &Provenance) -> Result<Vec<(Preset, EvalReport)>, EvalError> {
    let prepared = prepare_suite(suite, cfg)?;
    Ok(Preset::ALL
        .into_iter()
        .map(|p| {
            let c = RunConfig { params: p.params(), ..cfg.clone() };
            (p, EvalReport::new(&prepared.score(&c.decision()), &c, provenance))
        })
        .collect())
}

/// Every decision rule evaluated against the same sensing.
pub fn compare_rules(suite: &Suite, cfg: &RunConfig, provenance: &Provenance) -> Result<Vec<(Rule, EvalReport)>, EvalError> {
    let prepared = prepare_suite(suite, cfg)?;
    Ok(Rule::ALL
        .into_iter()
        .map(|r| {
            let c = RunConfig { rule: r, ..cfg.clone() };
            (r, EvalReport::new(&prepared.score(&c.decision()), &c, provenance))
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencyCell {
    pub latency_frames: usize,
    pub latency_ms: f64,
    pub predictor_order: u8,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub mean_warning_budget_s: Option<f64>,
    pub gate_pass: bool,
}

/// Latencies 0..=15 frames against each predictor order. The pipeline
/// compensates for exactly the injected latency.
pub fn latency_sweep(suite: &Suite, cfg: &RunConfig, orders: &[u8]) -> Result<Vec<LatencyCell>, EvalError> {
    let per_latency = (0..=MAX_LATENCY_FRAMES)
        .into_par_iter()
        .map(|latency| {
            let mut c = cfg.clone();
            c.sensor.latency_frames = latency;
            let prepared = prepare_suite(suite, &c)?;
            Ok(orders
                .iter()
                .map(|&order| {
                    let score = prepared.score(&DecisionSettings { predictor_order: order, ..c.decision() });
                    LatencyCell {
                        latency_frames: latency,
                        latency_ms: 1000.0 * latency as f64 / 30.0,
                        predictor_order: order,
                        metrics: score.metrics,
                        mean_warning_budget_s: score.mean_budget_s,
                        gate_pass: score.gates.pass,
                    }
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(per_latency.into_iter().flatten().collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementCell {
    pub height_m: f64,
    pub pitch_deg: f64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    /// No agent was detected in any trial.
    pub blind: bool,
}

pub fn placement_heights() -> Vec<f64> {
    (0..13).map(|i| 1.5 + 0.5 * i as f64).collect()
}

pub fn placement_pitches() -> Vec<f64> {
    (0..10).map(|i| -10.0 * i as f64).collect()
}

/// Mean sensitivity over seeded stochastic trials for each mount height and
/// pitch of the primary camera.
pub fn placement_grid(
    suite: &Suite,
    cfg: &RunConfig,
    heights: &[f64],
    pitches: &[f64],
    trials: u32,
) -> Result<Vec<PlacementCell>, EvalError> {
    let cells: Vec<(f64, f64)> = heights.iter().flat_map(|&h| pitches.iter().map(move |&p| (h, p))).collect();
    cells
        .par_iter()
        .map(|&(h, p)| {
            let mut c = cfg.clone();
            c.sensor.stochastic = true;
            c.trials = trials;
            c.sensor.cameras[0].model = c.sensor.cameras[0].model.with_mount(h, p);
            let prepared = prepare_suite(suite, &c)?;
            let blind = prepared.scenarios.iter().all(|s| s.detections.iter().flatten().all(|f| f.is_empty()));
            let score = prepared.score(&c.decision());
            Ok(PlacementCell {
                height_m: h,
                pitch_deg: p,
                sensitivity: score.metrics.sensitivity,
                specificity: score.metrics.specificity,
                blind,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ablation {
    pub without_loc_error: EvalReport,
    pub with_loc_error: EvalReport,
}

/// The same run with and without fisheye localization error.
pub fn ablation_loc_error(suite: &Suite, cfg: &RunConfig, provenance: &Provenance) -> Result<Ablation, EvalError> {
    let run = |on: bool| {
        let mut c = cfg.clone();
        c.sensor.apply_loc_error = on;
        evaluate(suite, &c, provenance)
    };
    Ok(Ablation { without_loc_error: run(false)?, with_loc_error: run(true)? })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtCell {
    pub parameter: String,
    pub value: f64,
    pub is_default: bool,
    pub sensitivity: Option<f64>,
    pub sev_fn: Option<f64>,
    /// Sensitivity change from the headline run in percentage points.
    pub delta_sensitivity_pp: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GtGrid {
    pub headline: Metrics,
    pub cells: Vec<GtCell>,
}

/// One-at-a-time perturbation of the CPA radius, stopping margin and TTC
/// threshold around `cfg.gt`, scored against unchanged sensing.
pub fn gt_sensitivity_grid(suite: &Suite, cfg: &RunConfig) -> Result<GtGrid, EvalError> {
    let prepared = prepare_suite(suite, cfg)?;
    let settings = cfg.decision();
    let headline = prepared.score(&settings).metrics;
    let base = cfg.gt;
    type Setter = fn(&mut GroundTruthParams, f64);
    let axes: [(&str, [f64; 3], f64, Setter); 3] = [
        ("cpa_radius_m", [3.0, 5.0, 7.0], base.cpa_radius_m, |g, v| g.cpa_radius_m = v),
        ("stop_margin", [0.6, 0.8, 1.0], base.stop_margin, |g, v| g.stop_margin = v),
        ("ttc_threshold_s", [2.0, 3.0, 4.0], base.ttc_threshold_s, |g, v| g.ttc_threshold_s = v),
    ];
    let cells = axes
        .iter()
        .flat_map(|(name, values, default, set)| values.iter().map(move |v| (*name, *v, *v == *default, *set)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(name, value, is_default, set)| {
            let mut gt = base;
            set(&mut gt, value);
            let m = prepared.relabel(suite, &gt).score(&settings).metrics;
            GtCell {
                parameter: name.to_string(),
                value,
                is_default,
                sensitivity: m.sensitivity,
                sev_fn: m.sev_fn,
                delta_sensitivity_pp: m.sensitivity.zip(headline.sensitivity).map(|(a, b)| 100.0 * (a - b)),
            }
        })
        .collect();
    Ok(GtGrid { headline, cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_and_validate() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
            p.params().validate().unwrap();
        }
        assert_eq!(Preset::NarrowWindow.params().d_max, 10.0);
        assert_eq!(Preset::Selected.params(), PipelineParams::SELECTED);
    }

    #[test]
    fn placement_axes() {
        let h = placement_heights();
        assert_eq!(h.len(), 13);
        assert_eq!((h[0], h[12]), (1.5, 7.5));
        let p = placement_pitches();
        assert_eq!(p.len(), 10);
        assert_eq!((p[0], p[9]), (0.0, -90.0));
    }
}
