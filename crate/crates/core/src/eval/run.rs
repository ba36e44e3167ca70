use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate_gates, Counts, GateReport, Metrics};
use super::{warning_budget, EvalError};
use crate::decision::{Decision, Detection, Pipeline, PipelineConfig, PipelineParams, Rule, State, TrackerConfig};
use crate::scenario::{label_frames, AgentClass, Category, FrameLabel, GroundTruthParams, Scenario, Suite};
use crate::sensor::{delay_buffer, observe, Observation, SensorConfig};

/// Everything one evaluation run depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub params: PipelineParams,
    pub rule: Rule,
    pub predictor_order: u8,
    #[serde(default)]
    pub tracker: TrackerConfig,
    pub sensor: SensorConfig,
    #[serde(default)]
    pub gt: GroundTruthParams,
    /// Monte Carlo trials for stochastic sensing; deterministic runs use one.
    pub trials: u32,
}

impl RunConfig {
    pub fn new(sensor: SensorConfig) -> Self {
        RunConfig {
            params: PipelineParams::SELECTED,
            rule: Rule::Pairwise,
            predictor_order: 1,
            tracker: TrackerConfig::default(),
            sensor,
            gt: GroundTruthParams::default(),
            trials: 100,
        }
    }

    pub fn effective_trials(&self) -> u32 {
        if self.sensor.stochastic {
            self.trials.max(1)
        } else {
            1
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        self.params.validate().map_err(EvalError::Config)?;
        self.sensor.validate().map_err(EvalError::Config)?;
        self.gt.validate().map_err(EvalError::Config)?;
        if self.predictor_order > 2 {
            return Err(EvalError::Config(format!("predictor order {} not in 0..=2", self.predictor_order)));
        }
        Ok(())
    }

    pub fn decision(&self) -> DecisionSettings {
        DecisionSettings { params: self.params, rule: self.rule, predictor_order: self.predictor_order, tracker: self.tracker }
    }
}

/// The part of a run that acts on observations; sensing is unaffected by it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionSettings {
    pub params: PipelineParams,
    pub rule: Rule,
    pub predictor_order: u8,
    pub tracker: TrackerConfig,
}

impl DecisionSettings {
    fn pipeline(&self, fps: f64, latency_frames: usize) -> PipelineConfig {
        PipelineConfig {
            params: self.params,
            rule: self.rule,
            predictor_order: self.predictor_order,
            latency_frames,
            fps,
            tracker: self.tracker,
        }
    }
}

/// Traceability fields stamped on every report and audit log.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub calibration_version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub id: String,
    pub class: AgentClass,
    pub true_xy: [f64; 2],
    pub observed_xy: Option<[f64; 2]>,
    pub detected: bool,
    pub localization_error_m: f64,
}

/// One frame of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub scenario: String,
    pub trial: u32,
    pub frame: usize,
    pub t: f64,
    pub agents: Vec<AgentRecord>,
    pub state: State,
    /// `(cyclist track id, pedestrian track id)` behind an ALERT.
    pub active_pair: Option<(u32, u32)>,
    pub gt: FrameLabel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditHeader {
    pub scenario: String,
    pub config_hash: String,
    pub calibration_version: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRun {
    pub scenario: String,
    pub trial: u32,
    pub records: Vec<AuditRecord>,
}

impl ScenarioRun {
    pub fn states(&self) -> Vec<State> {
        self.records.iter().map(|r| r.state).collect()
    }

    pub fn labels(&self) -> Vec<FrameLabel> {
        self.records.iter().map(|r| r.gt.clone()).collect()
    }

    /// JSONL: a header line, then one record per frame.
    pub fn write_audit(&self, out: &mut impl Write, provenance: &Provenance, seed: u64) -> std::io::Result<()> {
        let header = AuditHeader {
            scenario: self.scenario.clone(),
            config_hash: provenance.config_hash.clone(),
            calibration_version: provenance.calibration_version.clone(),
            seed,
        };
        serde_json::to_writer(&mut *out, &header)?;
        writeln!(out)?;
        for r in &self.records {
            serde_json::to_writer(&mut *out, r)?;
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Undelayed sensor output for every frame of `s`.
pub fn sense_scenario(s: &Scenario, sensor: &SensorConfig, trial: u32) -> Result<Vec<Vec<Observation>>, EvalError> {
    let index: BTreeMap<&str, usize> = s.agents.iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect();
    (0..s.frame_count())
        .map(|f| {
            let states: Vec<_> = s.positions_at(f)?.into_iter().map(|a| (index[a.id.as_str()], a)).collect();
            Ok(observe(f, s.time_of(f), &states, sensor, trial))
        })
        .collect()
}

fn detections(frame: &[Observation]) -> Vec<Detection> {
    frame.iter().filter_map(|o| o.observed_xy.filter(|_| o.detected).map(|xy| Detection { class: o.class, xy })).collect()
}

fn decide_stream(delayed: &[Vec<Detection>], cfg: PipelineConfig) -> Vec<Decision> {
    let mut pipeline = Pipeline::new(cfg);
    delayed.iter().enumerate().map(|(f, d)| pipeline.step(f, d)).collect()
}

/// Full frame loop for one trial: true state, sensing, latency, tracking,
/// prediction and decision, aligned with the ground-truth labels.
pub fn run_scenario(s: &Scenario, cfg: &RunConfig, trial: u32) -> Result<ScenarioRun, EvalError> {
    cfg.validate()?;
    let labels = label_frames(s, &cfg.gt);
    let observed = sense_scenario(s, &cfg.sensor, trial)?;
    let latency = cfg.sensor.latency_frames;
    let delayed: Vec<Vec<Detection>> =
        delay_buffer(observed.clone(), latency).iter().map(|f| detections(f)).collect();
    let decisions = decide_stream(&delayed, cfg.decision().pipeline(s.fps, latency));
    let records = observed
        .into_iter()
        .zip(decisions)
        .zip(labels)
        .enumerate()
        .map(|(f, ((obs, d), gt))| AuditRecord {
            scenario: s.id.clone(),
            trial,
            frame: f,
            t: s.time_of(f),
            agents: obs
                .into_iter()
                .map(|o| AgentRecord {
                    id: o.agent_id,
                    class: o.class,
                    true_xy: o.true_xy,
                    observed_xy: o.observed_xy,
                    detected: o.detected,
                    localization_error_m: o.localization_error_m,
                })
                .collect(),
            state: d.state,
            active_pair: d.pair,
            gt,
        })
        .collect();
    Ok(ScenarioRun { scenario: s.id.clone(), trial, records })
}

/// Ground truth and delayed detections for every scenario and trial, so
/// that many decision settings can be scored against the same sensing.
#[derive(Clone, Debug)]
pub struct PreparedSuite {
    pub scenarios: Vec<PreparedScenario>,
    pub latency_frames: usize,
}

#[derive(Clone, Debug)]
pub struct PreparedScenario {
    pub id: String,
    pub category: Category,
    pub fps: f64,
    pub labels: Vec<FrameLabel>,
    /// `[trial][frame]` detections after the latency buffer.
    pub detections: Vec<Vec<Vec<Detection>>>,
}

pub fn prepare_suite(suite: &Suite, cfg: &RunConfig) -> Result<PreparedSuite, EvalError> {
    cfg.validate()?;
    let trials = cfg.effective_trials();
    let latency = cfg.sensor.latency_frames;
    let scenarios = suite
        .scenarios
        .par_iter()
        .map(|s| {
            let detections = (0..trials)
                .into_par_iter()
                .map(|trial| {
                    let observed = sense_scenario(s, &cfg.sensor, trial)?;
                    Ok(delay_buffer(observed, latency).iter().map(|f| detections(f)).collect())
                })
                .collect::<Result<Vec<_>, EvalError>>()?;
            Ok(PreparedScenario {
                id: s.id.clone(),
                category: s.category,
                fps: s.fps,
                labels: label_frames(s, &cfg.gt),
                detections,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(PreparedSuite { scenarios, latency_frames: latency })
}

impl PreparedSuite {
    /// Same sensing, different ground-truth parameters.
    pub fn relabel(&self, suite: &Suite, gt: &GroundTruthParams) -> PreparedSuite {
        let mut out = self.clone();
        for p in &mut out.scenarios {
            if let Ok(s) = suite.get(&p.id) {
                p.labels = label_frames(s, gt);
            }
        }
        out
    }

    pub fn trials(&self) -> u32 {
        self.scenarios.first().map_or(0, |s| s.detections.len() as u32)
    }

    pub fn score(&self, settings: &DecisionSettings) -> SuiteScore {
        let per_scenario: Vec<ScenarioScore> = self
            .scenarios
            .par_iter()
            .map(|s| {
                let cfg = settings.pipeline(s.fps, self.latency_frames);
                let mut counts = Counts::default();
                let mut budgets = Vec::new();
                for trial in &s.detections {
                    let states: Vec<State> = decide_stream(trial, cfg).into_iter().map(|d| d.state).collect();
                    counts += Counts::tally(&states, &s.labels);
                    budgets.push(warning_budget(&states, &s.labels, s.fps));
                }
                ScenarioScore { id: s.id.clone(), category: s.category, counts, budgets }
            })
            .collect();
        SuiteScore::new(per_scenario)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioScore {
    pub id: String,
    pub category: Category,
    pub counts: Counts,
    /// One entry per trial.
    pub budgets: Vec<Option<f64>>,
}

impl ScenarioScore {
    /// Mean over the trials that alerted in time.
    pub fn mean_budget(&self) -> Option<f64> {
        mean(self.budgets.iter().flatten().copied())
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteScore {
    pub counts: Counts,
    pub metrics: Metrics,
    pub mean_budget_s: Option<f64>,
    pub gates: GateReport,
    pub per_scenario: Vec<ScenarioScore>,
}

impl SuiteScore {
    /// Aggregates in scenario-id order so the result does not depend on the
    /// order scenarios were listed or evaluated in.
    pub fn new(per_scenario: Vec<ScenarioScore>) -> Self {
        let mut sorted: Vec<&ScenarioScore> = per_scenario.iter().collect();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        let mut counts = Counts::default();
        for s in &sorted {
            counts += s.counts;
        }
        let metrics = counts.metrics();
        let mean_budget_s = mean(sorted.iter().filter_map(|s| s.mean_budget()));
        let gates = evaluate_gates(&metrics, mean_budget_s);
        SuiteScore { counts, metrics, mean_budget_s, gates, per_scenario }
    }

    pub fn scenario(&self, id: &str) -> Option<&ScenarioScore> {
        self.per_scenario.iter().find(|s| s.id == id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub id: String,
    pub category: Category,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub warning_budget_s: Option<f64>,
    /// Trials that alerted by the closest approach.
    pub alerted_trials: usize,
    pub counts: Counts,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidualRisk {
    pub failure_mode: String,
    pub scenario_coverage: String,
    pub sensor_model: String,
    pub field_blocking: String,
}

pub fn residual_risk_register() -> Vec<ResidualRisk> {
    serde_json::from_str(include_str!("../../data/residual_risk.json")).expect("bundled residual-risk register is valid")
}

/// Caveats attached to every report.
pub const REPORT_NOTES: [&str; 2] = [
    "Scenario trajectories and the recall curve are authored for this suite; absolute rates are not comparable with other trajectory sets.",
    "Ground-truth TTC is the time to the future closest approach; a pedestrian clearance-time term is not modelled.",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rule: Rule,
    pub params: PipelineParams,
    pub predictor_order: u8,
    pub latency_frames: usize,
    pub apply_loc_error: bool,
    pub stochastic: bool,
    pub cameras: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub mean_warning_budget_s: Option<f64>,
    pub gate_pass: bool,
    pub gates: GateReport,
    pub counts: Counts,
    pub per_scenario: Vec<ScenarioSummary>,
    pub config_hash: String,
    pub calibration_version: String,
    pub seed: u64,
    pub trials: u32,
    pub notes: Vec<String>,
    pub residual_risk: Vec<ResidualRisk>,
}

impl EvalReport {
    pub fn new(score: &SuiteScore, cfg: &RunConfig, provenance: &Provenance) -> Self {
        EvalReport {
            rule: cfg.rule,
            params: cfg.params,
            predictor_order: cfg.predictor_order,
            latency_frames: cfg.sensor.latency_frames,
            apply_loc_error: cfg.sensor.apply_loc_error,
            stochastic: cfg.sensor.stochastic,
            cameras: cfg.sensor.cameras.len(),
            metrics: score.metrics,
            mean_warning_budget_s: score.mean_budget_s,
            gate_pass: score.gates.pass,
            gates: score.gates.clone(),
            counts: score.counts,
            per_scenario: score
                .per_scenario
                .iter()
                .map(|s| ScenarioSummary {
                    id: s.id.clone(),
                    category: s.category,
                    metrics: s.counts.metrics(),
                    warning_budget_s: s.mean_budget(),
                    alerted_trials: s.budgets.iter().flatten().count(),
                    counts: s.counts,
                })
                .collect(),
            config_hash: provenance.config_hash.clone(),
            calibration_version: provenance.calibration_version.clone(),
            seed: cfg.sensor.seed,
            trials: cfg.effective_trials(),
            notes: REPORT_NOTES.iter().map(|s| s.to_string()).collect(),
            residual_risk: residual_risk_register(),
        }
    }

    /// Plain-text gate summary for terminals and logs.
    pub fn summary(&self) -> String {
        let pct = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{:.1}%", 100.0 * v));
        let mut s = String::new();
        let _ = writeln!(
            s,
            "rule {}  order {}  latency {} frames  loc error {}  trials {}  seed {}",
            self.rule,
            self.predictor_order,
            self.latency_frames,
            if self.apply_loc_error { "on" } else { "off" },
            self.trials,
            self.seed
        );
        let _ = writeln!(s, "config {}  calibration {}", self.config_hash, self.calibration_version);
        let _ = writeln!(
            s,
            "sensitivity {}  specificity {}  sev_fn {}  fatigue {}",
            pct(self.metrics.sensitivity),
            pct(self.metrics.specificity),
            pct(self.metrics.sev_fn),
            pct(self.metrics.fatigue)
        );
        let _ = writeln!(s, "{:<26} {:>10} {:>10} {:>9}", "scenario", "sens", "spec", "budget");
        for p in &self.per_scenario {
            let budget = p.warning_budget_s.map_or("-".to_string(), |b| format!("{b:.2} s"));
            let _ = writeln!(s, "{:<26} {:>10} {:>10} {:>9}", p.id, pct(p.metrics.sensitivity), pct(p.metrics.specificity), budget);
        }
        for g in &self.gates.checks {
            let value = g.value.map_or("undefined".to_string(), |v| format!("{v:.3}"));
            let verdict = if g.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "gate {:<22} {value} {} {}  {verdict}", g.name, g.comparison, g.threshold);
        }
        let _ = writeln!(s, "overall: {}", if self.gate_pass { "PASS" } else { "FAIL" });
        let _ = writeln!(s, "residual risks:");
        for r in &self.residual_risk {
            let _ = writeln!(s, "  {:<28} coverage: {:<28} blocking: {}", r.failure_mode, r.scenario_coverage, r.field_blocking);
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}

/// Sensing, scoring and reporting in one call.
pub fn evaluate(suite: &Suite, cfg: &RunConfig, provenance: &Provenance) -> Result<EvalReport, EvalError> {
    let prepared = prepare_suite(suite, cfg)?;
    Ok(EvalReport::new(&prepared.score(&cfg.decision()), cfg, provenance))
}
