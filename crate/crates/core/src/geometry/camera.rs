//! Fisheye camera model and the closed-form pixel/ground mappings.
//!
//! Camera frame: `x` forward along the optical axis, `y` right, `z` up. The
//! camera sits at `(0, 0, h)` above the ground plane `z = 0` and is pitched
//! about its `y` axis (negative pitch looks down).
//!
//! ```text
//! pixel -> (r, phi) -> theta = g^-1(r / f) -> ray d -> pitch -> d' -> ground g
//! ```

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::lens::Projection;
use super::GeometryError;

/// Rotation about the camera `y` axis by `pitch_deg`, mapping camera-frame
/// rays into the level (world-aligned) frame.
pub fn pitch_matrix(pitch_deg: f64) -> Matrix3<f64> {
    let (s, c) = pitch_deg.to_radians().sin_cos();
    Matrix3::new(c, 0.0, -s, 0.0, 1.0, 0.0, s, 0.0, c)
}

pub fn pitch_rotate(d: &Vector3<f64>, pitch_deg: f64) -> Vector3<f64> {
    pitch_matrix(pitch_deg) * d
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub projection: Projection,
    pub focal_px: f64,
    pub optical_center: [f64; 2],
    pub crop_size: [u32; 2],
    pub fov_deg: f64,
    pub height_m: f64,
    pub pitch_deg: f64,
}

impl CameraModel {
    pub fn new(
        projection: Projection,
        focal_px: f64,
        optical_center: [f64; 2],
        crop_size: [u32; 2],
        fov_deg: f64,
        height_m: f64,
        pitch_deg: f64,
    ) -> Result<Self, GeometryError> {
        let cam = CameraModel {
            projection,
            focal_px,
            optical_center,
            crop_size,
            fov_deg,
            height_m,
            pitch_deg,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// The calibrated deployment camera: 3500 px crop, 197.9 deg equidistant
    /// lens, level mount at 3.66 m.
    pub fn deployed() -> Self {
        CameraModel {
            projection: Projection::Equidistant,
            focal_px: 1013.3,
            optical_center: [1752.7, 1804.5],
            crop_size: [3500, 3500],
            fov_deg: 197.9,
            height_m: 3.66,
            pitch_deg: 0.0,
        }
    }

    /// Focal length from the fisheye image-circle diameter `D = 2R` and the
    /// lens field of view: `f = D * 180 / (fov * pi)`.
    pub fn focal_from_diameter(diameter_px: f64, fov_deg: f64) -> f64 {
        diameter_px * 180.0 / (fov_deg * std::f64::consts::PI)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |msg: String| Err(GeometryError::InvalidCamera(msg));
        if !(self.focal_px > 0.0) {
            return bad(format!("focal_px must be positive, got {}", self.focal_px));
        }
        if self.crop_size[0] == 0 || self.crop_size[1] == 0 {
            return bad("crop_size components must be positive".into());
        }
        if !(self.fov_deg > 0.0 && self.fov_deg <= 360.0) {
            return bad(format!("fov_deg must lie in (0, 360], got {}", self.fov_deg));
        }
        if !(self.height_m > 0.0) {
            return bad(format!("height_m must be positive, got {}", self.height_m));
        }
        let [cx, cy] = self.optical_center;
        let [w, h] = self.crop_size;
        if !(cx >= 0.0 && cx < w as f64 && cy >= 0.0 && cy < h as f64) {
            return bad(format!("optical center ({cx}, {cy}) lies outside the {w}x{h} crop"));
        }
        if !self.pitch_deg.is_finite() {
            return bad("pitch_deg must be finite".into());
        }
        Ok(())
    }

    pub fn half_fov_rad(&self) -> f64 {
        self.fov_deg.to_radians() / 2.0
    }

    /// Largest incidence angle at which a point is considered imaged.
    pub fn max_visible_incidence(&self) -> f64 {
        self.half_fov_rad().min(self.projection.max_incidence())
    }

    pub fn with_mount(&self, height_m: f64, pitch_deg: f64) -> Self {
        CameraModel { height_m, pitch_deg, ..self.clone() }
    }

    /// Unit ray in the (unpitched) camera frame for pixel `(u, v)`.
    pub fn pixel_to_ray(&self, u: f64, v: f64) -> Result<Vector3<f64>, GeometryError> {
        let dx = u - self.optical_center[0];
        let dy = v - self.optical_center[1];
        let r = dx.hypot(dy);
        let theta = self
            .projection
            .incidence(r, self.focal_px)
            .filter(|t| t.is_finite())
            .ok_or(GeometryError::InvalidPixel { u, v })?;
        let phi = dy.atan2(dx);
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Ok(Vector3::new(ct, st * cp, -st * sp))
    }

    /// Intersects a pitched ray with the ground. Rays at or above the horizon
    /// (`d'_z >= 0`) have no intersection.
    pub fn ray_to_ground(&self, d_pitched: &Vector3<f64>) -> Option<[f64; 2]> {
        if !(d_pitched.z < 0.0) {
            return None;
        }
        let t = -self.height_m / d_pitched.z;
        Some([t * d_pitched.x, t * d_pitched.y])
    }

    pub fn pixel_to_ground(&self, u: f64, v: f64) -> Option<[f64; 2]> {
        let d = self.pixel_to_ray(u, v).ok()?;
        self.ray_to_ground(&pitch_rotate(&d, self.pitch_deg))
    }

    /// Camera-frame direction (unpitched, not normalised) of a point given in
    /// camera-centred ground coordinates `(x, y, z)`.
    pub fn point_direction(&self, p: [f64; 3]) -> Vector3<f64> {
        let rel = Vector3::new(p[0], p[1], p[2] - self.height_m);
        pitch_matrix(self.pitch_deg).transpose() * rel
    }

    /// Forward projection with no field-of-view check. Returns the pixel and
    /// the incidence angle.
    pub fn project_unchecked(&self, p: [f64; 3]) -> Result<([f64; 2], f64), GeometryError> {
        let d = self.point_direction(p);
        let norm = d.norm();
        if !(norm > 1e-12) {
            return Err(GeometryError::AtCameraCentre);
        }
        let rho = d.y.hypot(d.z);
        let theta = rho.atan2(d.x);
        let r = self.projection.radius(theta, self.focal_px);
        let [cx, cy] = self.optical_center;
        if rho == 0.0 {
            return Ok(([cx, cy], theta));
        }
        Ok(([cx + r * d.y / rho, cy - r * d.z / rho], theta))
    }

    /// Projects a camera-centred point to pixel coordinates; points beyond the
    /// visible cone are rejected.
    pub fn ground_to_pixel(&self, p: [f64; 3]) -> Result<[f64; 2], GeometryError> {
        let (px, theta) = self.project_unchecked(p)?;
        if theta > self.max_visible_incidence() {
            return Err(GeometryError::OutsideFov { theta_deg: theta.to_degrees() });
        }
        Ok(px)
    }
}
