//! One frame of simulated detection: recall from box area, dropout and
//! localization error.

use crosswarn::geometry::CameraModel;
use crosswarn::scenario::{AgentClass, AgentState, CameraPose};
use crosswarn::sensor::{observe, SensorCamera, SensorConfig};

fn main() {
    let cam = SensorCamera::new(CameraPose::default(), CameraModel::deployed());
    let mut cfg = SensorConfig::deterministic(cam, true);
    cfg.stochastic = true;
    cfg.seed = 3;
    let agents: Vec<(usize, AgentState)> = [(AgentClass::Pedestrian, [6.0, 1.0]), (AgentClass::Cyclist, [20.0, -1.5])]
        .into_iter()
        .enumerate()
        .map(|(i, (class, position))| {
            (i, AgentState { id: format!("a{i}"), class, dims: class.default_dims(), position, velocity: [-4.0, 0.0], occluded: false })
        })
        .collect();
    for trial in 0..3 {
        for o in observe(0, 0.0, &agents, &cfg, trial) {
            println!(
                "trial {trial} {:<10} p={:.3} detected={} observed={:?} error {:.3} m",
                o.class.name(),
                o.detection_prob,
                o.detected,
                o.observed_xy.map(|p| [(p[0] * 100.0).round() / 100.0, (p[1] * 100.0).round() / 100.0]),
                o.localization_error_m
            );
        }
    }
}
