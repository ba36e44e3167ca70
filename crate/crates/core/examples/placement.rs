//! Sensitivity over camera mount heights and pitches.

use crosswarn::config::LoadedConfig;
use crosswarn::eval::placement_grid;
use crosswarn::scenario::Suite;

fn main() {
    let cfg = LoadedConfig::bundled().unwrap().run_config().unwrap();
    let cells = placement_grid(&Suite::bundled().unwrap(), &cfg, &[2.5, 3.66, 5.0], &[0.0, -30.0, -60.0], 5).unwrap();
    for c in cells {
        println!("h {:.2} m pitch {:>5.1}: sensitivity {:?}{}", c.height_m, c.pitch_deg, c.sensitivity, if c.blind { " (blind)" } else { "" });
    }
}
