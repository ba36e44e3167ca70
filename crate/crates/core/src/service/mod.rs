//! Command-line verbs and the local HTTP/JSON endpoint. Both are thin
//! layers over the library: every state they report comes from
//! [`run_scenario`] or [`evaluate`] with the request applied to the loaded
//! config.

pub mod cli;
pub mod http;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

use crate::config::LoadedConfig;
use crate::decision::{PipelineParams, Rule};
use crate::eval::{evaluate, run_scenario, AuditRecord, EvalReport, GateReport, Metrics, Provenance, RunConfig};
use crate::scenario::{Suite, SuiteManifest};

/// What a client may change for one run. Absent fields keep the loaded
/// config's values.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRequest {
    /// Required by `/simulate`; `/metrics` scores the whole suite without it.
    #[serde(default)]
    pub scenario: Option<String>,
    #[serde(default)]
    pub params: Option<PipelineParams>,
    #[serde(default)]
    pub rule: Option<Rule>,
    #[serde(default)]
    pub apply_loc_error: Option<bool>,
    #[serde(default)]
    pub stochastic: Option<bool>,
    #[serde(default)]
    pub latency_frames: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub predictor_order: Option<u8>,
    /// Multiplies every miss probability; 1 keeps the recall curve as is.
    #[serde(default)]
    pub dropout_scale: Option<f64>,
    /// Monte Carlo trials for `/metrics` when sensing is stochastic.
    #[serde(default)]
    pub trials: Option<u32>,
    /// Which stochastic trial `/simulate` replays.
    #[serde(default)]
    pub trial: Option<u32>,
}

impl RunRequest {
    pub fn apply(&self, base: &RunConfig) -> RunConfig {
        let mut c = base.clone();
        if let Some(p) = self.params {
            c.params = p;
        }
        if let Some(r) = self.rule {
            c.rule = r;
        }
        if let Some(v) = self.apply_loc_error {
            c.sensor.apply_loc_error = v;
        }
        if let Some(v) = self.stochastic {
            c.sensor.stochastic = v;
        }
        if let Some(v) = self.latency_frames {
            c.sensor.latency_frames = v;
        }
        if let Some(v) = self.seed {
            c.sensor.seed = v;
        }
        if let Some(v) = self.predictor_order {
            c.predictor_order = v;
        }
        if let Some(v) = self.dropout_scale {
            c.sensor.dropout_scale = v;
        }
        if let Some(v) = self.trials {
            c.trials = v;
        }
        c
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown scenario {0}")]
    UnknownScenario(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl ServiceError {
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::UnknownScenario(_) => "unknown_scenario",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Internal(_) => "internal",
        }
    }
}

/// Full per-frame trace of one scenario run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateResponse {
    pub scenario: String,
    pub fps: f64,
    pub trial: u32,
    pub seed: u64,
    pub config_hash: String,
    pub calibration_version: String,
    pub frames: Vec<AuditRecord>,
}

/// Gate outcome of the most recent full-suite evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSummary {
    pub gate_pass: bool,
    pub gates: GateReport,
    #[serde(flatten)]
    pub metrics: Metrics,
    pub mean_warning_budget_s: Option<f64>,
    pub rule: Rule,
    pub params: PipelineParams,
    pub config_hash: String,
    pub calibration_version: String,
    pub seed: u64,
    pub trials: u32,
}

impl GateSummary {
    pub fn of(report: &EvalReport) -> Self {
        GateSummary {
            gate_pass: report.gate_pass,
            gates: report.gates.clone(),
            metrics: report.metrics,
            mean_warning_budget_s: report.mean_warning_budget_s,
            rule: report.rule,
            params: report.params,
            config_hash: report.config_hash.clone(),
            calibration_version: report.calibration_version.clone(),
            seed: report.seed,
            trials: report.trials,
        }
    }
}

/// Immutable suite and config shared by every request, plus the cached
/// gate summary.
#[derive(Clone)]
pub struct AppState {
    pub loaded: Arc<LoadedConfig>,
    pub suite: Arc<Suite>,
    pub base: Arc<RunConfig>,
    pub last_gates: Arc<Mutex<Option<GateSummary>>>,
}

impl AppState {
    pub fn new(loaded: LoadedConfig, suite: Suite) -> Result<Self, crate::config::ConfigError> {
        let base = loaded.run_config()?;
        Ok(AppState {
            loaded: Arc::new(loaded),
            suite: Arc::new(suite),
            base: Arc::new(base),
            last_gates: Arc::new(Mutex::new(None)),
        })
    }

    pub fn provenance(&self) -> Provenance {
        self.loaded.provenance()
    }

    pub fn manifest(&self) -> &SuiteManifest {
        &self.suite.manifest
    }

    fn config_for(&self, req: &RunRequest) -> Result<RunConfig, ServiceError> {
        let cfg = req.apply(&self.base);
        cfg.validate().map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        Ok(cfg)
    }

    pub fn simulate(&self, req: &RunRequest) -> Result<SimulateResponse, ServiceError> {
        let id = req.scenario.as_deref().ok_or_else(|| ServiceError::BadRequest("scenario is required".into()))?;
        let s = self.suite.get(id).map_err(|_| ServiceError::UnknownScenario(id.to_string()))?;
        let cfg = self.config_for(req)?;
        let trial = req.trial.unwrap_or(0);
        let run = run_scenario(s, &cfg, trial).map_err(|e| ServiceError::Internal(e.to_string()))?;
        let prov = self.provenance();
        Ok(SimulateResponse {
            scenario: s.id.clone(),
            fps: s.fps,
            trial,
            seed: cfg.sensor.seed,
            config_hash: prov.config_hash,
            calibration_version: prov.calibration_version,
            frames: run.records,
        })
    }

    /// Scores one scenario, or the whole suite when none is named.
    pub fn metrics(&self, req: &RunRequest) -> Result<EvalReport, ServiceError> {
        let cfg = self.config_for(req)?;
        let report = match &req.scenario {
            Some(id) => {
                let s = self.suite.get(id).map_err(|_| ServiceError::UnknownScenario(id.clone()))?;
                evaluate(&Suite::from_scenarios(vec![s.clone()]), &cfg, &self.provenance())
            }
            None => evaluate(&self.suite, &cfg, &self.provenance()),
        };
        report.map_err(|e| ServiceError::Internal(e.to_string()))
    }

    /// The cached summary, evaluating the loaded config on first use.
    pub async fn gates(&self) -> Result<GateSummary, ServiceError> {
        let mut slot = self.last_gates.lock().await;
        if let Some(g) = slot.as_ref() {
            return Ok(g.clone());
        }
        let me = self.clone();
        let report = tokio::task::spawn_blocking(move || me.metrics(&RunRequest::default()))
            .await
            .map_err(|e| ServiceError::Internal(e.to_string()))??;
        let summary = GateSummary::of(&report);
        *slot = Some(summary.clone());
        Ok(summary)
    }

    pub async fn record_gates(&self, report: &EvalReport) {
        *self.last_gates.lock().await = Some(GateSummary::of(report));
    }
}
