//! Ground-plane multi-object tracker: greedy nearest-neighbour association
//! against constant-velocity predictions, coasting, and exponentially
//! smoothed velocity and acceleration.

use serde::{Deserialize, Serialize};

use crate::scenario::AgentClass;

pub const DEFAULT_GATE_M: f64 = 3.0;
pub const DEFAULT_MAX_COAST_FRAMES: usize = 300;
pub const DEFAULT_SMOOTHING: f64 = 0.5;
const HISTORY_CAP: usize = 600;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class: AgentClass,
    pub xy: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackedObject {
    pub id: u32,
    pub class: AgentClass,
    /// `(frame, [x, y])`, one entry per frame since birth; coasted frames
    /// hold the constant-velocity prediction.
    pub history: Vec<(usize, [f64; 2])>,
    /// Metres per frame.
    pub smoothed_velocity: [f64; 2],
    /// Metres per frame squared.
    pub smoothed_accel: [f64; 2],
    pub last_seen: usize,
}

impl TrackedObject {
    pub fn position(&self) -> [f64; 2] {
        self.history.last().expect("tracks are born with one entry").1
    }

    pub fn last_frame(&self) -> usize {
        self.history.last().expect("tracks are born with one entry").0
    }

    pub fn position_at(&self, frame: usize) -> Option<[f64; 2]> {
        let first = self.history.first()?.0;
        let i = frame.checked_sub(first)?;
        self.history.get(i).filter(|(f, _)| *f == frame).map(|e| e.1)
    }

    fn predicted(&self, frame: usize) -> [f64; 2] {
        let n = frame.saturating_sub(self.last_frame()) as f64;
        let p = self.position();
        [p[0] + n * self.smoothed_velocity[0], p[1] + n * self.smoothed_velocity[1]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    pub gate_m: f64,
    pub max_coast_frames: usize,
    pub smoothing: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig { gate_m: DEFAULT_GATE_M, max_coast_frames: DEFAULT_MAX_COAST_FRAMES, smoothing: DEFAULT_SMOOTHING }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Tracker {
    pub config: TrackerConfig,
    tracks: Vec<TrackedObject>,
    next_id: u32,
}

fn ema(old: [f64; 2], new: [f64; 2], alpha: f64) -> [f64; 2] {
    [alpha * new[0] + (1.0 - alpha) * old[0], alpha * new[1] + (1.0 - alpha) * old[1]]
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Self {
        Tracker { config, tracks: Vec::new(), next_id: 0 }
    }

    pub fn tracks(&self) -> &[TrackedObject] {
        &self.tracks
    }

    /// Associates one frame of detections. Matching is greedy over
    /// (distance, track id, detection index) ascending, within the gate and
    /// between detections and tracks of the same class.
    pub fn update(&mut self, frame: usize, detections: &[Detection]) {
        let alpha = self.config.smoothing;
        let mut candidates = Vec::new();
        for (ti, t) in self.tracks.iter().enumerate() {
            let pred = t.predicted(frame);
            for (di, d) in detections.iter().enumerate() {
                if d.class != t.class {
                    continue;
                }
                let dist = (d.xy[0] - pred[0]).hypot(d.xy[1] - pred[1]);
                if dist <= self.config.gate_m {
                    candidates.push((dist, t.id, di, ti));
                }
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut track_taken = vec![false; self.tracks.len()];
        let mut det_taken = vec![false; detections.len()];
        for (_, _, di, ti) in candidates {
            if track_taken[ti] || det_taken[di] {
                continue;
            }
            track_taken[ti] = true;
            det_taken[di] = true;
            let t = &mut self.tracks[ti];
            let gap = frame.saturating_sub(t.last_frame()).max(1) as f64;
            let last = t.position();
            let inst = [(detections[di].xy[0] - last[0]) / gap, (detections[di].xy[1] - last[1]) / gap];
            let old_v = t.smoothed_velocity;
            t.smoothed_velocity = ema(old_v, inst, alpha);
            let dv = [(t.smoothed_velocity[0] - old_v[0]) / gap, (t.smoothed_velocity[1] - old_v[1]) / gap];
            t.smoothed_accel = ema(t.smoothed_accel, dv, alpha);
            t.history.push((frame, detections[di].xy));
            t.last_seen = frame;
        }

        for (ti, t) in self.tracks.iter_mut().enumerate() {
            if !track_taken[ti] && t.last_frame() < frame {
                let p = t.predicted(frame);
                t.history.push((frame, p));
            }
            if t.history.len() > HISTORY_CAP {
                t.history.drain(..t.history.len() - HISTORY_CAP);
            }
        }
        let max_coast = self.config.max_coast_frames;
        self.tracks.retain(|t| frame - t.last_seen <= max_coast);

        for (di, d) in detections.iter().enumerate() {
            if det_taken[di] {
                continue;
            }
            self.tracks.push(TrackedObject {
                id: self.next_id,
                class: d.class,
                history: vec![(frame, d.xy)],
                smoothed_velocity: [0.0, 0.0],
                smoothed_accel: [0.0, 0.0],
                last_seen: frame,
            });
            self.next_id += 1;
        }
    }
}

/// Speed from the displacement over the last 4 frames of history, in m/s.
pub fn estimate_speed(track: &TrackedObject, fps: f64) -> Option<f64> {
    const WINDOW: usize = 4;
    let last = track.last_frame();
    let now = track.position();
    let then = track.position_at(last.checked_sub(WINDOW)?)?;
    Some((now[0] - then[0]).hypot(now[1] - then[1]) / (WINDOW as f64 / fps))
}

/// Position extrapolated `delay_frames` ahead: order 0 returns the stale
/// position, 1 adds `n v`, 2 also adds `a n^2 / 2`.
pub fn predict(track: &TrackedObject, delay_frames: usize, order: u8) -> [f64; 2] {
    let p = track.position();
    let n = delay_frames as f64;
    let v = track.smoothed_velocity;
    let a = track.smoothed_accel;
    match order {
        0 => p,
        1 => [p[0] + n * v[0], p[1] + n * v[1]],
        _ => [p[0] + n * v[0] + 0.5 * a[0] * n * n, p[1] + n * v[1] + 0.5 * a[1] * n * n],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn det(class: AgentClass, x: f64, y: f64) -> Detection {
        Detection { class, xy: [x, y] }
    }

    #[test]
    fn continuous_detection_keeps_one_track() {
        let mut tr = Tracker::default();
        for f in 0..100 {
            tr.update(f, &[det(AgentClass::Cyclist, 0.1 * f as f64, 2.0)]);
        }
        assert_eq!(tr.tracks().len(), 1);
        assert_eq!(tr.tracks()[0].id, 0);
        assert_eq!(tr.tracks()[0].history.len(), 100);
        assert!((tr.tracks()[0].smoothed_velocity[0] - 0.1).abs() < 1e-9);
    }

    #[test]
    fn dropout_resumes_same_track_by_coasting() {
        let mut tr = Tracker::default();
        let x = |f: usize| 5.0 - 0.2 * f as f64;
        for f in 0..20 {
            tr.update(f, &[det(AgentClass::Cyclist, x(f), 1.0)]);
        }
        for f in 20..25 {
            tr.update(f, &[]);
        }
        let coasted = tr.tracks()[0].position();
        assert!((coasted[0] - x(24)).abs() < 1e-5);
        for f in 25..40 {
            tr.update(f, &[det(AgentClass::Cyclist, x(f), 1.0)]);
        }
        assert_eq!(tr.tracks().len(), 1);
        assert_eq!(tr.tracks()[0].id, 0);
        assert_eq!(tr.tracks()[0].last_seen, 39);
    }

    #[test]
    fn tracks_drop_after_ten_seconds_unseen() {
        let mut tr = Tracker::default();
        tr.update(0, &[det(AgentClass::Pedestrian, 1.0, 1.0)]);
        for f in 1..=300 {
            tr.update(f, &[]);
        }
        assert_eq!(tr.tracks().len(), 1);
        tr.update(301, &[]);
        assert!(tr.tracks().is_empty());
    }

    #[test]
    fn nearby_agents_never_swap_under_noise() {
        let noise = Normal::new(0.0, 0.3).unwrap();
        for seed in 0..1000 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut tr = Tracker::default();
            for f in 0..60 {
                let t = f as f64 / 30.0;
                let a = det(AgentClass::Pedestrian, 2.0 + 1.4 * t + noise.sample(&mut rng), noise.sample(&mut rng));
                let b = det(AgentClass::Pedestrian, 2.0 + 1.4 * t + noise.sample(&mut rng), 10.0 + noise.sample(&mut rng));
                let dets = if seed % 2 == 0 { vec![a, b] } else { vec![b, a] };
                tr.update(f, &dets);
            }
            assert_eq!(tr.tracks().len(), 2, "seed {seed}");
            for t in tr.tracks() {
                let ys: Vec<f64> = t.history.iter().map(|h| h.1[1]).collect();
                let near_zero = ys.iter().all(|y| y.abs() < 3.0);
                let near_ten = ys.iter().all(|y| (y - 10.0).abs() < 3.0);
                assert!(near_zero || near_ten, "seed {seed}: track {} swapped", t.id);
            }
        }
    }

    #[test]
    fn classes_are_not_cross_matched() {
        let mut tr = Tracker::default();
        tr.update(0, &[det(AgentClass::Pedestrian, 3.0, 0.0)]);
        tr.update(1, &[det(AgentClass::Cyclist, 3.1, 0.0)]);
        assert_eq!(tr.tracks().len(), 2);
    }

    #[test]
    fn speed_estimates() {
        let mut still = Tracker::default();
        let mut moving = Tracker::default();
        for f in 0..10 {
            still.update(f, &[det(AgentClass::Pedestrian, 4.0, 1.0)]);
            moving.update(f, &[det(AgentClass::Cyclist, 5.0 * f as f64 / 30.0, 0.0)]);
        }
        assert_eq!(estimate_speed(&still.tracks()[0], 30.0), Some(0.0));
        assert!((estimate_speed(&moving.tracks()[0], 30.0).unwrap() - 5.0).abs() < 1e-9);
        let mut young = Tracker::default();
        for f in 0..4 {
            young.update(f, &[det(AgentClass::Cyclist, f as f64, 0.0)]);
        }
        assert_eq!(estimate_speed(&young.tracks()[0], 30.0), None);
    }

    #[test]
    fn speed_error_under_bounded_localization_error() {
        // position errors uniform in a 0.25 m disc
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut offset = || {
            let r = 0.25 * rng.random::<f64>().sqrt();
            let a = rng.random_range(0.0..std::f64::consts::TAU);
            [r * a.cos(), r * a.sin()]
        };
        let worst = 2.0 * 0.25 / (4.0 / 30.0);
        let (mut sq, mut n) = (0.0, 0.0);
        for _ in 0..2000 {
            let mut tr = Tracker::default();
            for f in 0..12 {
                let e = offset();
                tr.update(f, &[det(AgentClass::Cyclist, 5.0 * f as f64 / 30.0 + e[0], e[1])]);
            }
            let err = estimate_speed(&tr.tracks()[0], 30.0).unwrap() - 5.0;
            assert!(err.abs() <= worst + 1e-9);
            sq += err * err;
            n += 1.0;
        }
        assert!((sq / n).sqrt() < 1.5, "rms {}", (sq / n).sqrt());
    }

    #[test]
    fn predictor_orders() {
        let mut tr = Tracker::default();
        for f in 0..30 {
            tr.update(f, &[det(AgentClass::Cyclist, 0.2 * f as f64, 1.0)]);
        }
        let t = &tr.tracks()[0];
        for order in 0..=2 {
            assert_eq!(predict(t, 0, order), t.position());
        }
        let p = predict(t, 6, 1);
        assert!((p[0] - 0.2 * 35.0).abs() < 1e-6 && (p[1] - 1.0).abs() < 1e-12);
        assert!((predict(t, 6, 2)[0] - p[0]).abs() < 1e-6);
    }
}
