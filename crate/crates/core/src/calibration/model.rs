use nalgebra::{Matrix2x3, Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::Projection;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub cx: f64,
    pub cy: f64,
    pub focal_px: f64,
}

/// Board-to-camera transform `P = R(rotation) * X + translation`, with the
/// rotation stored as an axis-angle vector. The camera frame is the unpitched
/// fisheye frame (`x` along the optical axis, `y` right, `z` up).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: [f64; 3],
    pub translation: [f64; 3],
}

impl Pose {
    pub fn from_rotation(rot: &Rotation3<f64>, translation: Vector3<f64>) -> Self {
        let w = rot.scaled_axis();
        Pose { rotation: [w.x, w.y, w.z], translation: [translation.x, translation.y, translation.z] }
    }

    pub fn rotation_matrix(&self) -> Rotation3<f64> {
        Rotation3::from_scaled_axis(Vector3::from(self.rotation))
    }

    pub fn transform(&self, x: &[f64; 3]) -> Vector3<f64> {
        self.rotation_matrix() * Vector3::from(*x) + Vector3::from(self.translation)
    }

    /// Left-multiplies the rotation by `exp(delta_rot)` and adds `delta_t`.
    pub fn retract(&self, delta_rot: &Vector3<f64>, delta_t: &Vector3<f64>) -> Self {
        let rot = Rotation3::from_scaled_axis(*delta_rot) * self.rotation_matrix();
        Pose::from_rotation(&rot, Vector3::from(self.translation) + delta_t)
    }
}

pub(crate) struct ProjectionJacobian {
    /// d(u, v) / d(cx, cy, f)
    pub intrinsics: Matrix2x3<f64>,
    /// d(u, v) / d(point in camera frame)
    pub point: Matrix2x3<f64>,
}

/// Projects a camera-frame point; `None` if the point sits on the camera centre.
pub(crate) fn project(proj: Projection, k: &Intrinsics, p: &Vector3<f64>) -> Option<[f64; 2]> {
    let rho = p.y.hypot(p.z);
    if p.norm() < 1e-12 {
        return None;
    }
    let theta = rho.atan2(p.x);
    if rho == 0.0 {
        return Some([k.cx, k.cy]);
    }
    let s = k.focal_px * proj.unit_radius(theta) / rho;
    Some([k.cx + s * p.y, k.cy - s * p.z])
}

pub(crate) fn project_with_jacobian(
    proj: Projection,
    k: &Intrinsics,
    p: &Vector3<f64>,
) -> Option<([f64; 2], ProjectionJacobian)> {
    let n2 = p.norm_squared();
    if n2 < 1e-24 {
        return None;
    }
    let rho = p.y.hypot(p.z).max(1e-12);
    let theta = rho.atan2(p.x);
    let g = proj.unit_radius(theta);
    let dg = proj.unit_radius_derivative(theta);
    let f = k.focal_px;
    let s = f * g / rho;

    let dtheta = Vector3::new(-rho / n2, p.x * p.y / (rho * n2), p.x * p.z / (rho * n2));
    let drho = Vector3::new(0.0, p.y / rho, p.z / rho);
    let ds = dtheta * (f * dg / rho) - drho * (f * g / (rho * rho));

    let du = ds * p.y + Vector3::new(0.0, s, 0.0);
    let dv = -ds * p.z - Vector3::new(0.0, 0.0, s);

    let jac = ProjectionJacobian {
        intrinsics: Matrix2x3::new(1.0, 0.0, g * p.y / rho, 0.0, 1.0, -g * p.z / rho),
        point: Matrix2x3::from_rows(&[du.transpose(), dv.transpose()]),
    };
    Some(([k.cx + s * p.y, k.cy - s * p.z], jac))
}

pub(crate) fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobian_matches_finite_differences() {
        let k = Intrinsics { cx: 1750.0, cy: 1760.0, focal_px: 1010.0 };
        let pts = [
            Vector3::new(1.0, 0.3, -0.2),
            Vector3::new(0.1, -0.8, 0.5),
            Vector3::new(-0.05, 0.6, 0.7),
        ];
        for proj in Projection::ALL {
            for p in &pts {
                let (_, jac) = project_with_jacobian(proj, &k, p).unwrap();
                let h = 1e-6;
                for i in 0..3 {
                    let mut hi = *p;
                    let mut lo = *p;
                    hi[i] += h;
                    lo[i] -= h;
                    let a = project(proj, &k, &hi).unwrap();
                    let b = project(proj, &k, &lo).unwrap();
                    for r in 0..2 {
                        let fd = (a[r] - b[r]) / (2.0 * h);
                        let an = jac.point[(r, i)];
                        assert!((fd - an).abs() < 1e-4 * an.abs().max(1.0), "{proj} {r} {i}");
                    }
                }
                let hf = 1e-4;
                let a = project(proj, &Intrinsics { focal_px: k.focal_px + hf, ..k }, p).unwrap();
                let b = project(proj, &Intrinsics { focal_px: k.focal_px - hf, ..k }, p).unwrap();
                for r in 0..2 {
                    let fd = (a[r] - b[r]) / (2.0 * hf);
                    assert!((fd - jac.intrinsics[(r, 2)]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn agrees_with_camera_model_projection() {
        let cam = crate::geometry::CameraModel::deployed();
        let k = Intrinsics { cx: cam.optical_center[0], cy: cam.optical_center[1], focal_px: cam.focal_px };
        let world = [6.0, -2.0, 0.0];
        let expect = cam.ground_to_pixel(world).unwrap();
        let p = Vector3::new(world[0], world[1], world[2] - cam.height_m);
        let got = project(cam.projection, &k, &p).unwrap();
        assert!((expect[0] - got[0]).abs() < 1e-9 && (expect[1] - got[1]).abs() < 1e-9);
    }
}
