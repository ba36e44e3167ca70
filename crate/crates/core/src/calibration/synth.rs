//! Synthetic checkerboard observations standing in for detected corners.

use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::model::{project, Intrinsics, Pose};
use super::CalibrationError;
use crate::geometry::CameraModel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoardSpec {
    pub cols: usize,
    pub rows: usize,
    pub square_m: f64,
}

impl Default for BoardSpec {
    fn default() -> Self {
        BoardSpec { cols: 9, rows: 6, square_m: 0.1 }
    }
}

impl BoardSpec {
    /// Inner-corner grid centred on the board origin, in the board's `z = 0` plane.
    pub fn points(&self) -> Vec<[f64; 3]> {
        let ox = (self.cols as f64 - 1.0) * self.square_m / 2.0;
        let oy = (self.rows as f64 - 1.0) * self.square_m / 2.0;
        let mut pts = Vec::with_capacity(self.cols * self.rows);
        for j in 0..self.rows {
            for i in 0..self.cols {
                pts.push([i as f64 * self.square_m - ox, j as f64 * self.square_m - oy, 0.0]);
            }
        }
        pts
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFrame {
    pub board_points: Vec<[f64; 3]>,
    pub image_points: Vec<[f64; 2]>,
    pub pose: Pose,
}

impl CalibrationFrame {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        if self.board_points.len() != self.image_points.len() || self.board_points.len() < 4 {
            return Err(CalibrationError::InvalidFrame(format!(
                "{} board points vs {} image points (need >= 4 matching)",
                self.board_points.len(),
                self.image_points.len()
            )));
        }
        Ok(())
    }
}

pub fn intrinsics_of(cam: &CameraModel) -> Intrinsics {
    Intrinsics { cx: cam.optical_center[0], cy: cam.optical_center[1], focal_px: cam.focal_px }
}

const MAX_POSE_ATTEMPTS: usize = 10_000;

/// Random board poses whose corners all image inside the crop and field of
/// view, observed through `true_cam` with isotropic Gaussian pixel noise.
pub fn synthesize_frames(
    true_cam: &CameraModel,
    n_frames: usize,
    board: &BoardSpec,
    noise_px: f64,
    seed: u64,
) -> Result<Vec<CalibrationFrame>, CalibrationError> {
    if n_frames < 3 {
        return Err(CalibrationError::TooFewFrames(n_frames));
    }
    if !(noise_px >= 0.0) {
        return Err(CalibrationError::InvalidFrame(format!("noise_px must be >= 0, got {noise_px}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
    noise_rng.set_stream(1);
    let noise = Normal::new(0.0, noise_px).expect("finite sigma");
    let k = intrinsics_of(true_cam);
    let pts = board.points();
    // keep corners a little inside the imaged cone
    let max_theta = (true_cam.max_visible_incidence() - 3f64.to_radians()).min(88f64.to_radians());
    let [w, h] = true_cam.crop_size;

    let mut frames = Vec::with_capacity(n_frames);
    let mut attempts = 0;
    while frames.len() < n_frames {
        attempts += 1;
        if attempts > MAX_POSE_ATTEMPTS * n_frames {
            return Err(CalibrationError::PoseSampling { attempts });
        }
        let pose = random_pose(&mut rng, max_theta);
        let rot = pose.rotation_matrix();
        let t = Vector3::from(pose.translation);
        let mut image = Vec::with_capacity(pts.len());
        let mut ok = true;
        for x in &pts {
            let p = rot * Vector3::from(*x) + t;
            let theta = p.y.hypot(p.z).atan2(p.x);
            let Some(px) = project(true_cam.projection, &k, &p) else {
                ok = false;
                break;
            };
            if theta > max_theta || px[0] < 0.0 || px[1] < 0.0 || px[0] >= w as f64 || px[1] >= h as f64 {
                ok = false;
                break;
            }
            image.push(px);
        }
        if !ok {
            continue;
        }
        if noise_px > 0.0 {
            for px in &mut image {
                px[0] += noise.sample(&mut noise_rng);
                px[1] += noise.sample(&mut noise_rng);
            }
        }
        frames.push(CalibrationFrame { board_points: pts.clone(), image_points: image, pose });
    }
    Ok(frames)
}

fn random_pose(rng: &mut ChaCha8Rng, max_theta: f64) -> Pose {
    let theta = max_theta * rng.random::<f64>().sqrt();
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    let dir = Vector3::new(theta.cos(), theta.sin() * phi.cos(), theta.sin() * phi.sin());
    let dist = rng.random_range(0.6..1.6);

    // board z axis faces the camera, then a random tilt and in-plane roll
    let facing = Rotation3::rotation_between(&Vector3::z(), &(-dir)).unwrap_or_else(|| {
        Rotation3::from_axis_angle(&Vector3::x_axis(), std::f64::consts::PI)
    });
    let roll = Rotation3::from_axis_angle(&Vector3::z_axis(), rng.random_range(0.0..std::f64::consts::TAU));
    let tilt_axis = Unit::new_normalize(Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0));
    let tilt = Rotation3::from_axis_angle(&tilt_axis, rng.random_range(0.0..45f64.to_radians()));
    Pose::from_rotation(&(facing * tilt * roll), dir * dist)
}

/// Moves a random `fraction` of all corners radially outward by `magnitude_px`.
pub fn corrupt_outliers(frames: &mut [CalibrationFrame], center: [f64; 2], fraction: f64, magnitude_px: f64, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count = 0;
    for frame in frames.iter_mut() {
        for px in &mut frame.image_points {
            if rng.random::<f64>() < fraction {
                let dx = px[0] - center[0];
                let dy = px[1] - center[1];
                let r = dx.hypot(dy).max(1e-9);
                px[0] += magnitude_px * dx / r;
                px[1] += magnitude_px * dy / r;
                count += 1;
            }
        }
    }
    count
}
