use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

use crosswarn::config::LoadedConfig;
use crosswarn::eval::{evaluate, run_scenario, AuditHeader};
use crosswarn::scenario::Suite;
use crosswarn::service::{AppState, RunRequest};

fn crosswarn(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_crosswarn"));
    cmd.args(args).env("RUST_LOG", "warn");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn suite_passes_on_shipped_defaults_and_matches_the_library_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let run = crosswarn(&["suite", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8(run.stdout).unwrap();
    assert!(stdout.contains("overall: PASS"));
    let loaded = LoadedConfig::bundled().unwrap();
    let direct = evaluate(&Suite::bundled().unwrap(), &loaded.run_config().unwrap(), &loaded.provenance()).unwrap();
    assert_eq!(read_json(&out), serde_json::to_value(&direct).unwrap());
}

#[test]
fn failing_gates_exit_one() {
    let narrow = crosswarn(&["suite", "--preset", "narrow_window"], &[]);
    assert_eq!(code(&narrow), 1);
    assert!(String::from_utf8(narrow.stdout).unwrap().contains("gate sensitivity"));
    // the same window through an environment override
    let env = crosswarn(&["suite"], &[("CONFIG_PIPELINE__D_MAX", "10")]);
    assert_eq!(code(&env), 1);
}

#[test]
fn usage_and_config_errors_have_distinct_codes() {
    assert_eq!(code(&crosswarn(&["run", "no-such"], &[])), 2);
    assert_eq!(code(&crosswarn(&["frobnicate"], &[])), 2);
    assert_eq!(code(&crosswarn(&["suite", "--latency", "40"], &[])), 2);
    assert_eq!(code(&crosswarn(&["--config", "/no/such/config.yaml", "suite"], &[])), 3);
    assert_eq!(code(&crosswarn(&["suite"], &[("CONFIG_SENSOR__SEED", "not-a-number")])), 3);
    assert_eq!(code(&crosswarn(&["--suite-dir", "/no/such/dir", "suite"], &[])), 3);
    assert_eq!(code(&crosswarn(&["--help"], &[])), 0);
}

#[test]
fn run_audit_trail_matches_the_served_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("audit.jsonl");
    let args = ["run", "kerb_step_out", "--latency", "4", "--stochastic", "--seed", "11", "--trial", "2"];
    let run = crosswarn(&[&args[..], &["--out", out.to_str().unwrap()]].concat(), &[]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));

    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    let header: AuditHeader = serde_json::from_str(lines.next().unwrap()).unwrap();
    assert_eq!((header.scenario.as_str(), header.seed), ("kerb_step_out", 11));
    let cli_states: Vec<Value> = lines.map(|l| serde_json::from_str::<Value>(l).unwrap()["state"].clone()).collect();

    let st = AppState::new(LoadedConfig::bundled().unwrap(), Suite::bundled().unwrap()).unwrap();
    assert_eq!(header.config_hash, st.loaded.config_hash);
    let req = RunRequest {
        scenario: Some("kerb_step_out".into()),
        latency_frames: Some(4),
        stochastic: Some(true),
        seed: Some(11),
        trial: Some(2),
        ..RunRequest::default()
    };
    let served = serde_json::to_value(st.simulate(&req).unwrap()).unwrap();
    let served_states: Vec<Value> = served["frames"].as_array().unwrap().iter().map(|f| f["state"].clone()).collect();
    assert_eq!(cli_states, served_states);

    let direct = run_scenario(st.suite.get("kerb_step_out").unwrap(), &req.apply(&st.base), 2).unwrap();
    assert_eq!(cli_states.len(), direct.records.len());
}

#[test]
fn sweep_and_grid_verbs_write_json() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = dir.path().join("sweep.json");
    let run = crosswarn(&["sweep-latency", "--orders", "0,1", "--out", sweep.to_str().unwrap()], &[]);
    assert_eq!(code(&run), 0);
    assert_eq!(read_json(&sweep).as_array().unwrap().len(), 32);

    let grid = dir.path().join("gt.json");
    assert_eq!(code(&crosswarn(&["gt-grid", "--out", grid.to_str().unwrap()], &[])), 0);
    assert_eq!(read_json(&grid)["cells"].as_array().unwrap().len(), 9);

    let ablate = dir.path().join("ablate.json");
    assert_eq!(code(&crosswarn(&["ablate", "--out", ablate.to_str().unwrap()], &[])), 0);
    let v = read_json(&ablate);
    assert_eq!(v["with_loc_error"]["apply_loc_error"], Value::Bool(true));
    assert_eq!(v["without_loc_error"]["apply_loc_error"], Value::Bool(false));

    assert_eq!(code(&crosswarn(&["sweep-latency", "--orders", "3"], &[])), 2);
}

#[test]
fn calibrate_output_feeds_back_as_a_calibration_file() {
    let dir = tempfile::tempdir().unwrap();
    let run = crosswarn(&["calibrate", "--frames", "12", "--seed", "4", "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let cal = dir.path().join("calibration.json");
    let v = read_json(&cal);
    assert!((v["focal_px"].as_f64().unwrap() - 1013.3).abs() < 5.0);
    assert!(std::fs::read_to_string(dir.path().join("trace.jsonl")).unwrap().lines().count() > 1);

    let lut = dir.path().join("lut.json");
    let run = crosswarn(&["--calibration", cal.to_str().unwrap(), "lut", "--out", lut.to_str().unwrap()], &[]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let stats = read_json(&lut);
    assert_eq!(stats["width"], Value::from(3500));
    assert!(stats["valid_pixels"].as_u64().unwrap() > 0);
}

#[test]
fn optimize_runs_a_short_search() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("opt.json");
    let run = crosswarn(&["optimize", "--population", "6", "--generations", "2", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    let v = read_json(&out);
    assert_eq!(v["trace"].as_array().unwrap().len(), 3);
    assert!(v["params"]["n_memory"].as_u64().unwrap() >= 1);
}
