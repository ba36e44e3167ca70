//! Ground-truth danger labels for one bundled scenario.

use crosswarn::scenario::{label_frames, stopping_distance, GroundTruthParams, Suite, Tier};

fn main() {
    let suite = Suite::bundled().unwrap();
    let s = suite.get("head_on_crossing").unwrap();
    let gt = GroundTruthParams::default();
    let labels = label_frames(s, &gt);
    let count = |t: Tier| labels.iter().filter(|l| l.tier == t).count();
    println!("{}: {} frames, {} actionable, {} imminent", s.id, labels.len(), count(Tier::Actionable), count(Tier::Imminent));
    if let Some((i, l)) = labels.iter().enumerate().find(|(_, l)| l.dangerous) {
        println!("first dangerous frame {i}: ttc {:.2} s, cpa {:.2} m, severity {:.2}", l.ttc_s, l.cpa_m, l.severity);
    }
    println!("stopping distance at 6 m/s: {:.1} m", stopping_distance(6.0, 0.84, 1.96));
}
