//! Axis-aligned detector boxes from 3D agent boxes, and the ground-contact
//! error introduced by inverse-projecting their bottom centre.

use serde::{Deserialize, Serialize};

use super::camera::CameraModel;
use super::GeometryError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxDims {
    pub length: f64,
    pub width: f64,
    pub height: f64,
}

impl BoxDims {
    pub const fn new(length: f64, width: f64, height: f64) -> Self {
        BoxDims { length, width, height }
    }

    pub fn is_valid(&self) -> bool {
        self.length > 0.0 && self.width > 0.0 && self.height > 0.0
    }
}

/// Ground-standing box in camera-centred coordinates. `heading` is the yaw of
/// the box's length axis measured from camera `x` toward `y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub center_ground: [f64; 2],
    pub dims: BoxDims,
    pub heading: f64,
}

impl Box3D {
    pub fn new(center_ground: [f64; 2], dims: BoxDims, heading: f64) -> Self {
        Box3D { center_ground, dims, heading }
    }

    pub fn corners(&self) -> [[f64; 3]; 8] {
        let (s, c) = self.heading.sin_cos();
        let [x0, y0] = self.center_ground;
        let hl = self.dims.length / 2.0;
        let hw = self.dims.width / 2.0;
        let mut out = [[0.0; 3]; 8];
        let mut i = 0;
        for dl in [-hl, hl] {
            for dw in [-hw, hw] {
                for z in [0.0, self.dims.height] {
                    out[i] = [x0 + c * dl - s * dw, y0 + s * dl + c * dw, z];
                    i += 1;
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PixelRect {
    pub min: [f64; 2],
    pub max: [f64; 2],
    pub visible_corners: usize,
}

impl PixelRect {
    pub fn bottom_center(&self) -> [f64; 2] {
        [(self.min[0] + self.max[0]) / 2.0, self.max[1]]
    }

    pub fn center(&self) -> [f64; 2] {
        [(self.min[0] + self.max[0]) / 2.0, (self.min[1] + self.max[1]) / 2.0]
    }

    pub fn area(&self) -> f64 {
        (self.max[0] - self.min[0]) * (self.max[1] - self.min[1])
    }
}

/// Tightest axis-aligned rectangle around the visible projected corners.
pub fn project_box_to_bbox(cam: &CameraModel, b: &Box3D) -> Result<PixelRect, GeometryError> {
    let mut min = [f64::INFINITY; 2];
    let mut max = [f64::NEG_INFINITY; 2];
    let mut visible = 0;
    for corner in b.corners() {
        let Ok(px) = cam.ground_to_pixel(corner) else { continue };
        visible += 1;
        for k in 0..2 {
            min[k] = min[k].min(px[k]);
            max[k] = max[k].max(px[k]);
        }
    }
    if visible == 0 {
        return Err(GeometryError::NotVisible);
    }
    Ok(PixelRect { min, max, visible_corners: visible })
}

/// Result of localizing a box the way the runtime localizes a detection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Localization {
    pub observed: [f64; 2],
    pub error_m: f64,
    pub rect: PixelRect,
}

pub fn localize_box(cam: &CameraModel, b: &Box3D) -> Result<Localization, GeometryError> {
    let rect = project_box_to_bbox(cam, b)?;
    let [u, v] = rect.bottom_center();
    let observed = cam.pixel_to_ground(u, v).ok_or(GeometryError::NoGroundIntersection)?;
    let error_m = (observed[0] - b.center_ground[0]).hypot(observed[1] - b.center_ground[1]);
    Ok(Localization { observed, error_m, rect })
}

pub fn bbox_localization_error(cam: &CameraModel, b: &Box3D) -> Result<f64, GeometryError> {
    localize_box(cam, b).map(|l| l.error_m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    const PED: BoxDims = BoxDims::new(0.5, 0.5, 1.7);
    const CYCLIST: BoxDims = BoxDims::new(1.8, 0.6, 1.8);
    const CAR: BoxDims = BoxDims::new(4.5, 1.8, 1.5);

    fn err_at(dims: BoxDims, x: f64) -> f64 {
        let b = Box3D::new([x, 0.0], dims, FRAC_PI_2);
        bbox_localization_error(&CameraModel::deployed(), &b).unwrap()
    }

    #[test]
    fn nadir_box_is_centred_on_optical_axis() {
        let cam = CameraModel::deployed().with_mount(3.66, -90.0);
        let rect = project_box_to_bbox(&cam, &Box3D::new([0.0, 0.0], PED, 0.0)).unwrap();
        let c = rect.center();
        assert!((c[0] - cam.optical_center[0]).abs() < 1.0);
        assert!((c[1] - cam.optical_center[1]).abs() < 1.0);
        assert_eq!(rect.visible_corners, 8);
    }

    #[test]
    fn pedestrian_at_ten_metres() {
        let cam = CameraModel::deployed();
        let loc = localize_box(&cam, &Box3D::new([10.0, 0.0], PED, 0.0)).unwrap();
        assert!((loc.observed[0] - 10.0).hypot(loc.observed[1]) < 0.5);
        assert!((loc.error_m - 0.249).abs() < 0.15);
    }

    #[test]
    fn car_at_twenty_five_metres() {
        assert!((err_at(CAR, 25.0) - 0.830).abs() < 0.3);
    }

    #[test]
    fn error_vanishes_for_degenerate_boxes() {
        let cam = CameraModel::deployed();
        let mut last = f64::INFINITY;
        for scale in [1.0, 0.1, 0.01, 0.001] {
            let dims = BoxDims::new(0.5 * scale, 0.5 * scale, 1e-6);
            let e = bbox_localization_error(&cam, &Box3D::new([8.0, 1.0], dims, 0.3)).unwrap();
            assert!(e <= last + 1e-12);
            last = e;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn class_ordering_holds_at_every_distance() {
        for x in [3.0, 5.0, 10.0, 15.0, 25.0] {
            let (p, c, v) = (err_at(PED, x), err_at(CYCLIST, x), err_at(CAR, x));
            assert!(p < c || x <= 3.0, "{x}: ped {p} cyclist {c}");
            assert!(c < v, "{x}: cyclist {c} car {v}");
        }
    }

    #[test]
    fn cyclist_error_is_non_decreasing_with_distance() {
        let mut last = 0.0;
        for i in 0..=44 {
            let e = err_at(CYCLIST, 3.0 + 0.5 * i as f64);
            assert!(e >= last - 1e-9);
            last = e;
        }
    }

    #[test]
    fn invisible_box_is_an_error() {
        let cam = CameraModel::deployed();
        let b = Box3D::new([-30.0, 0.0], PED, 0.0);
        assert_eq!(project_box_to_bbox(&cam, &b), Err(GeometryError::NotVisible));
    }

    #[test]
    fn partially_visible_box_uses_visible_corners_only() {
        let mut cam = CameraModel::deployed();
        cam.fov_deg = 120.0;
        let b = Box3D::new([2.0, 3.6], CAR, 0.0);
        let rect = project_box_to_bbox(&cam, &b).unwrap();
        assert!(rect.visible_corners > 0 && rect.visible_corners < 8);
    }
}
