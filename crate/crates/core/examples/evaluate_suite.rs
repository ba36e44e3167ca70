//! Score the bundled suite against the deployment gates and compare the
//! decision rules.

use crosswarn::config::LoadedConfig;
use crosswarn::eval::{compare_rules, evaluate};
use crosswarn::scenario::Suite;

fn main() {
    let loaded = LoadedConfig::bundled().unwrap();
    let cfg = loaded.run_config().unwrap();
    let suite = Suite::bundled().unwrap();
    let report = evaluate(&suite, &cfg, &loaded.provenance()).unwrap();
    println!("{}", report.summary());
    for (rule, r) in compare_rules(&suite, &cfg, &loaded.provenance()).unwrap() {
        println!("{:<14} sensitivity {:?} specificity {:?}", rule.name(), r.metrics.sensitivity, r.metrics.specificity);
    }
}
