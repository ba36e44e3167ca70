//! Recover the lens intrinsics from synthetic checkerboard views and rank
//! the candidate projection models.

use crosswarn::calibration::{bundle_adjust_with, coarse_initialization, synthesize_frames, BoardSpec, SolverOptions};
use crosswarn::geometry::{CameraModel, Projection};

fn main() {
    let truth = CameraModel::deployed();
    let frames = synthesize_frames(&truth, 42, &BoardSpec::default(), 1.0, 7).unwrap();
    let init = coarse_initialization(truth.crop_size, 200.0);
    let res = bundle_adjust_with(&frames, Projection::Equidistant, init, &SolverOptions::default()).unwrap();
    let k = res.intrinsics;
    println!("focal {:.2} px (true {:.2}), centre [{:.1}, {:.1}]", k.focal_px, truth.focal_px, k.cx, k.cy);
    println!("RMS {:.3} px after {} iterations", res.rms_reprojection_px, res.trace.len());
    for (p, rms) in &res.per_model_rms {
        println!("  {:<14} {rms:.3} px", p.name());
    }
}
