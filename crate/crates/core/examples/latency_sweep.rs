//! Warning budget as injected latency grows, with and without motion
//! compensation.

use crosswarn::config::LoadedConfig;
use crosswarn::eval::latency_sweep;
use crosswarn::scenario::Suite;

fn main() {
    let cfg = LoadedConfig::bundled().unwrap().run_config().unwrap();
    let cells = latency_sweep(&Suite::bundled().unwrap(), &cfg, &[0, 1]).unwrap();
    for c in cells.iter().filter(|c| c.latency_frames % 3 == 0) {
        println!(
            "{:>4.0} ms order {}: sensitivity {:?} budget {:?} gates {}",
            c.latency_ms, c.predictor_order, c.metrics.sensitivity, c.mean_warning_budget_s, c.gate_pass
        );
    }
}
