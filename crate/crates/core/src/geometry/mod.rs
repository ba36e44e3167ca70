//! Fisheye ground-plane geometry: lens models, the camera model, the
//! precomputed ground lookup table and 3D box localization error.

mod bbox;
mod camera;
mod lens;
mod lut;

pub use bbox::{
    bbox_localization_error, localize_box, project_box_to_bbox, Box3D, BoxDims, Localization,
    PixelRect,
};
pub use camera::{pitch_matrix, pitch_rotate, CameraModel};
pub use lens::Projection;
pub use lut::GroundLut;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
    #[error("pixel ({u:.2}, {v:.2}) lies outside the lens model's image domain")]
    InvalidPixel { u: f64, v: f64 },
    #[error("point is outside the field of view (incidence {theta_deg:.2} deg)")]
    OutsideFov { theta_deg: f64 },
    #[error("point coincides with the camera centre")]
    AtCameraCentre,
    #[error("box has no visible corners")]
    NotVisible,
    #[error("bounding box bottom centre does not intersect the ground")]
    NoGroundIntersection,
}
