//! Intrinsic calibration by direct bundle adjustment of the fisheye lens model
//! over 2D-3D checkerboard correspondences.

mod model;
mod solver;
mod synth;

pub use model::{Intrinsics, Pose};
pub use solver::{
    bundle_adjust, bundle_adjust_with, coarse_initialization, compare_models, initial_pose,
    objective_and_gradient, reprojection_cost, rms_px, write_trace_jsonl, CalibrationResult, Loss,
    Params, SolverOptions, TraceEntry,
};
pub use synth::{corrupt_outliers, intrinsics_of, synthesize_frames, BoardSpec, CalibrationFrame};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("need at least 3 frames, got {0}")]
    TooFewFrames(usize),
    #[error("invalid calibration frame: {0}")]
    InvalidFrame(String),
    #[error("could not sample a fully visible board pose after {attempts} attempts")]
    PoseSampling { attempts: usize },
    #[error("bundle adjustment did not converge (best rms {:.4} px)", best.rms_reprojection_px)]
    NotConverged { best: Box<CalibrationResult> },
}
