//! A short differential-evolution search over the pipeline parameters.

use crosswarn::config::LoadedConfig;
use crosswarn::eval::{optimize_params, prepare_suite, DeOptions, ParamBounds};
use crosswarn::scenario::Suite;

fn main() {
    let cfg = LoadedConfig::bundled().unwrap().run_config().unwrap();
    let prepared = prepare_suite(&Suite::bundled().unwrap(), &cfg).unwrap();
    let opts = DeOptions { population: 12, generations: 10, ..DeOptions::default() };
    let res = optimize_params(&prepared, &cfg.decision(), &ParamBounds::default(), &opts).unwrap();
    println!("best {:?}", res.params);
    println!("objective {:.4}, gates {}", res.objective, if res.gate_pass { "pass" } else { "fail" });
}
