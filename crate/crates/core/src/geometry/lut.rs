use rayon::prelude::*;

use super::camera::{pitch_matrix, CameraModel};

/// Per-pixel ground coordinates (camera-centred metres, `x` forward, `y`
/// right) with a validity mask, built once per camera model.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundLut {
    width: usize,
    height: usize,
    ground_xy: Vec<[f64; 2]>,
    valid: Vec<bool>,
}

impl GroundLut {
    pub fn build(cam: &CameraModel) -> Self {
        let width = cam.crop_size[0] as usize;
        let height = cam.crop_size[1] as usize;
        let rot = pitch_matrix(cam.pitch_deg);
        let mut ground_xy = vec![[f64::NAN; 2]; width * height];
        let mut valid = vec![false; width * height];

        ground_xy
            .par_chunks_mut(width)
            .zip(valid.par_chunks_mut(width))
            .enumerate()
            .for_each(|(v, (row_xy, row_ok))| {
                for u in 0..width {
                    let Ok(d) = cam.pixel_to_ray(u as f64, v as f64) else { continue };
                    if let Some(g) = cam.ray_to_ground(&(rot * d)) {
                        row_xy[u] = g;
                        row_ok[u] = true;
                    }
                }
            });

        GroundLut { width, height, ground_xy, valid }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Direct index lookup for an integer pixel.
    pub fn get(&self, u: usize, v: usize) -> Option<[f64; 2]> {
        if u >= self.width || v >= self.height {
            return None;
        }
        let i = v * self.width + u;
        self.valid[i].then(|| self.ground_xy[i])
    }

    pub fn is_valid(&self, u: usize, v: usize) -> bool {
        self.get(u, v).is_some()
    }

    /// Nearest-pixel lookup for a detection coordinate.
    pub fn lookup(&self, u: f64, v: f64) -> Option<[f64; 2]> {
        if !(u >= -0.5 && v >= -0.5) {
            return None;
        }
        self.get(u.round() as usize, v.round() as usize)
    }

    /// Bilinear interpolation between the four surrounding pixels; all four
    /// must be valid.
    pub fn sample(&self, u: f64, v: f64) -> Option<[f64; 2]> {
        if !(u >= 0.0 && v >= 0.0) {
            return None;
        }
        let u0 = u.floor() as usize;
        let v0 = v.floor() as usize;
        let u1 = (u0 + 1).min(self.width.saturating_sub(1));
        let v1 = (v0 + 1).min(self.height.saturating_sub(1));
        let fu = u - u0 as f64;
        let fv = v - v0 as f64;
        let a = self.get(u0, v0)?;
        let b = self.get(u1, v0)?;
        let c = self.get(u0, v1)?;
        let d = self.get(u1, v1)?;
        let mut out = [0.0; 2];
        for k in 0..2 {
            let top = a[k] * (1.0 - fu) + b[k] * fu;
            let bottom = c[k] * (1.0 - fu) + d[k] * fu;
            out[k] = top * (1.0 - fv) + bottom * fv;
        }
        Some(out)
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&ok| ok).count()
    }

    /// Maximum ground range among valid pixels.
    pub fn max_range(&self) -> f64 {
        self.ground_xy
            .iter()
            .zip(&self.valid)
            .filter(|(_, &ok)| ok)
            .map(|(g, _)| g[0].hypot(g[1]))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{pitch_rotate, Projection};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::FRAC_PI_4;

    /// The deployed lens scaled down to a 700 px crop so tests stay light.
    fn small_cam(pitch: f64) -> CameraModel {
        let scale = 0.2;
        CameraModel {
            projection: Projection::Equidistant,
            focal_px: 1013.3 * scale,
            optical_center: [1752.7 * scale, 1804.5 * scale],
            crop_size: [700, 700],
            fov_deg: 197.9,
            height_m: 3.66,
            pitch_deg: pitch,
        }
    }

    #[test]
    fn agrees_with_composed_mapping() {
        let cam = small_cam(-20.0);
        let lut = GroundLut::build(&cam);
        for v in (0..700).step_by(7) {
            for u in (0..700).step_by(5) {
                let direct = cam
                    .pixel_to_ray(u as f64, v as f64)
                    .ok()
                    .and_then(|d| cam.ray_to_ground(&pitch_rotate(&d, cam.pitch_deg)));
                match (direct, lut.get(u, v)) {
                    (Some(a), Some(b)) => {
                        assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9)
                    }
                    (None, None) => {}
                    other => panic!("mismatch at ({u},{v}): {other:?}"),
                }
            }
        }
    }

    #[test]
    fn validity_mask_follows_ray_direction() {
        let cam = small_cam(0.0);
        let lut = GroundLut::build(&cam);
        let rot = pitch_matrix(cam.pitch_deg);
        for v in (0..700).step_by(11) {
            for u in (0..700).step_by(13) {
                let below = cam
                    .pixel_to_ray(u as f64, v as f64)
                    .map(|d| (rot * d).z < 0.0)
                    .unwrap_or(false);
                assert_eq!(lut.is_valid(u, v), below, "({u},{v})");
            }
        }
    }

    #[test]
    fn forty_five_degree_pixel_samples_to_mount_height() {
        let cam = small_cam(0.0);
        let lut = GroundLut::build(&cam);
        let v = cam.optical_center[1] + cam.focal_px * FRAC_PI_4;
        let g = lut.sample(cam.optical_center[0], v).unwrap();
        assert!((g[0] - 3.66).abs() < 1e-3 && g[1].abs() < 1e-3, "{g:?}");
    }

    #[test]
    fn round_trip_through_forward_projection() {
        let cam = small_cam(-10.0);
        let lut = GroundLut::build(&cam);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 1000 {
            let u = rng.random_range(0..700);
            let v = rng.random_range(0..700);
            let Some(g) = lut.get(u, v) else { continue };
            let (px, _) = cam.project_unchecked([g[0], g[1], 0.0]).unwrap();
            assert!((px[0] - u as f64).hypot(px[1] - v as f64) < 0.5);
            checked += 1;
        }
    }

    #[test]
    fn builds_are_bit_identical() {
        let cam = small_cam(-30.0);
        let a = GroundLut::build(&cam);
        let b = GroundLut::build(&cam);
        assert_eq!(a.valid, b.valid);
        let bits = |l: &GroundLut| {
            l.ground_xy.iter().flat_map(|g| [g[0].to_bits(), g[1].to_bits()]).collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn bilinear_sample_is_accurate_far_out() {
        let cam = small_cam(0.0);
        let lut = GroundLut::build(&cam);
        let px = cam.ground_to_pixel([20.0, 3.0, 0.0]).unwrap();
        assert!(lut.lookup(px[0], px[1]).is_some());
        let smooth = lut.sample(px[0], px[1]).unwrap();
        let err = |g: [f64; 2]| (g[0] - 20.0).hypot(g[1] - 3.0);
        assert!(err(smooth) < 0.05);
    }
}
