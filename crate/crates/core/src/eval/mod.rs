//! Suite evaluation: metrics, warning budgets, deployment gates, audit
//! trail, parameter search, latency and placement sweeps, ablation and the
//! ground-truth sensitivity grid.

mod metrics;
mod run;
mod search;
mod sweeps;

pub use metrics::{
    compute_metrics, evaluate_gates, warning_budget, Counts, GateCheck, GateReport, Metrics, GATE_BUDGET_S,
    GATE_SENSITIVITY, GATE_SPECIFICITY,
};
pub use run::{
    evaluate, prepare_suite, residual_risk_register, run_scenario, sense_scenario, AgentRecord, AuditHeader,
    AuditRecord, DecisionSettings, EvalReport, PreparedScenario, PreparedSuite, Provenance, ResidualRisk, RunConfig,
    ScenarioRun, ScenarioScore, ScenarioSummary, SuiteScore, REPORT_NOTES,
};
pub use search::{
    differential_evolution, objective, optimize_params, DeOptions, GenerationTrace, OptimizeResult, ParamBounds,
};
pub use sweeps::{
    ablation_loc_error, compare_presets, compare_rules, gt_sensitivity_grid, latency_sweep, placement_grid,
    placement_heights, placement_pitches, Ablation, GtCell, GtGrid, LatencyCell, PlacementCell, Preset,
};

use crate::scenario::ScenarioError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("invalid configuration: {0}")]
    Config(String),
}
