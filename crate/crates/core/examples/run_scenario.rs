//! Run the full pipeline over one scenario and write its audit trail.

use crosswarn::config::LoadedConfig;
use crosswarn::eval::{run_scenario, warning_budget};
use crosswarn::scenario::Suite;

fn main() {
    let loaded = LoadedConfig::bundled().unwrap();
    let cfg = loaded.run_config().unwrap();
    let suite = Suite::bundled().unwrap();
    let s = suite.get("head_on_crossing").unwrap();
    let run = run_scenario(s, &cfg, 0).unwrap();
    let states = run.states();
    let first = states.iter().position(|s| s.name() == "ALERT");
    println!("{} frames, first ALERT at {first:?}", states.len());
    println!("warning budget {:?} s", warning_budget(&states, &run.labels(), s.fps));
    let mut out = Vec::new();
    run.write_audit(&mut out, &loaded.provenance(), cfg.sensor.seed).unwrap();
    println!("audit trail: {} JSON lines", out.split(|&b| b == b'\n').filter(|l| !l.is_empty()).count());
}
