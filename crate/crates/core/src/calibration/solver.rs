//! Levenberg-Marquardt bundle adjustment of the lens intrinsics `(cx, cy, f)`
//! and per-frame board poses, followed by a soft-L1 robust refinement.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, Vector3, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::{project, project_with_jacobian, skew, Intrinsics, Pose};
use super::synth::CalibrationFrame;
use super::CalibrationError;
use crate::geometry::{CameraModel, Projection};

const INTRINSIC_DOF: usize = 3;
const POSE_DOF: usize = 6;
const LAMBDA_CEILING: f64 = 1e16;
const MAX_ROBUST_ROUNDS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Loss {
    Squared,
    /// `rho(s) = 2 (sqrt(1 + s) - 1)` on `s = |e|^2 / scale^2`.
    SoftL1 { scale: f64 },
}

impl Loss {
    fn cost(self, sq: f64) -> f64 {
        match self {
            Loss::Squared => sq,
            Loss::SoftL1 { scale } => {
                let s = sq / (scale * scale);
                scale * scale * 2.0 * ((1.0 + s).sqrt() - 1.0)
            }
        }
    }

    fn weight(self, sq: f64) -> f64 {
        match self {
            Loss::Squared => 1.0,
            Loss::SoftL1 { scale } => 1.0 / (1.0 + sq / (scale * scale)).sqrt(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub initial_lambda: f64,
    pub relative_tolerance: f64,
    pub robust_pass: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { max_iterations: 200, initial_lambda: 1e-3, relative_tolerance: 1e-10, robust_pass: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub pass: String,
    pub iteration: usize,
    pub cost: f64,
    pub lambda: f64,
    pub accepted: bool,
}

pub fn write_trace_jsonl<W: Write>(trace: &[TraceEntry], mut out: W) -> std::io::Result<()> {
    for entry in trace {
        serde_json::to_writer(&mut out, entry)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub projection: Projection,
    pub intrinsics: Intrinsics,
    pub per_frame_poses: Vec<Pose>,
    /// Root mean square over all residual components (u and v), in pixels.
    pub rms_reprojection_px: f64,
    pub initial_rms_px: f64,
    pub per_model_rms: BTreeMap<Projection, f64>,
    pub trace: Vec<TraceEntry>,
}

impl CalibrationResult {
    /// Optical-centre offset from the geometric crop centre.
    pub fn center_offset(&self, crop_size: [u32; 2]) -> [f64; 2] {
        [self.intrinsics.cx - crop_size[0] as f64 / 2.0, self.intrinsics.cy - crop_size[1] as f64 / 2.0]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub intrinsics: Intrinsics,
    pub poses: Vec<Pose>,
}

impl Params {
    pub fn dof(&self) -> usize {
        INTRINSIC_DOF + POSE_DOF * self.poses.len()
    }

    /// Applies a tangent-space step: additive on intrinsics and translation,
    /// left-multiplicative on rotation.
    pub fn retract(&self, delta: &DVector<f64>) -> Params {
        let k = Intrinsics {
            cx: self.intrinsics.cx + delta[0],
            cy: self.intrinsics.cy + delta[1],
            focal_px: self.intrinsics.focal_px + delta[2],
        };
        let poses = self
            .poses
            .iter()
            .enumerate()
            .map(|(i, pose)| {
                let o = INTRINSIC_DOF + POSE_DOF * i;
                let dr = Vector3::new(delta[o], delta[o + 1], delta[o + 2]);
                let dt = Vector3::new(delta[o + 3], delta[o + 4], delta[o + 5]);
                pose.retract(&dr, &dt)
            })
            .collect();
        Params { intrinsics: k, poses }
    }
}

/// Sum of squared reprojection residuals; `None` if any point is degenerate.
pub fn reprojection_cost(frames: &[CalibrationFrame], proj: Projection, params: &Params) -> Option<f64> {
    loss_cost(frames, proj, params, Loss::Squared)
}

fn loss_cost(frames: &[CalibrationFrame], proj: Projection, params: &Params, loss: Loss) -> Option<f64> {
    let mut total = 0.0;
    for (frame, pose) in frames.iter().zip(&params.poses) {
        let rot = pose.rotation_matrix();
        let t = Vector3::from(pose.translation);
        for (x, obs) in frame.board_points.iter().zip(&frame.image_points) {
            let px = project(proj, &params.intrinsics, &(rot * Vector3::from(*x) + t))?;
            let sq = (px[0] - obs[0]).powi(2) + (px[1] - obs[1]).powi(2);
            total += loss.cost(sq);
        }
    }
    total.is_finite().then_some(total)
}

pub fn rms_px(frames: &[CalibrationFrame], proj: Projection, params: &Params) -> f64 {
    let n: usize = frames.iter().map(|f| f.image_points.len()).sum();
    match reprojection_cost(frames, proj, params) {
        Some(c) if n > 0 => (c / (2 * n) as f64).sqrt(),
        _ => f64::INFINITY,
    }
}

/// Per-axis noise scale from the median residual magnitude, which for
/// isotropic Gaussian noise is `sigma * sqrt(2 ln 2)`.
fn median_scale(frames: &[CalibrationFrame], proj: Projection, params: &Params) -> f64 {
    let mut mags = Vec::new();
    for (frame, pose) in frames.iter().zip(&params.poses) {
        for (x, obs) in frame.board_points.iter().zip(&frame.image_points) {
            if let Some(px) = project(proj, &params.intrinsics, &pose.transform(x)) {
                mags.push((px[0] - obs[0]).hypot(px[1] - obs[1]));
            }
        }
    }
    if mags.is_empty() {
        return f64::INFINITY;
    }
    mags.sort_by(f64::total_cmp);
    mags[mags.len() / 2] / (2.0 * std::f64::consts::LN_2).sqrt()
}

/// Weighted normal equations `H = sum w J^T J`, `g = sum w J^T e`.
fn normal_equations(frames: &[CalibrationFrame], proj: Projection, params: &Params, loss: Loss) -> (DMatrix<f64>, DVector<f64>) {
    let n = params.dof();
    let mut h = DMatrix::<f64>::zeros(n, n);
    let mut g = DVector::<f64>::zeros(n);
    for (i, (frame, pose)) in frames.iter().zip(&params.poses).enumerate() {
        let o = INTRINSIC_DOF + POSE_DOF * i;
        let rot = pose.rotation_matrix();
        let t = Vector3::from(pose.translation);
        for (x, obs) in frame.board_points.iter().zip(&frame.image_points) {
            let rx = rot * Vector3::from(*x);
            let Some((px, jac)) = project_with_jacobian(proj, &params.intrinsics, &(rx + t)) else { continue };
            let e = [px[0] - obs[0], px[1] - obs[1]];
            let w = loss.weight(e[0] * e[0] + e[1] * e[1]);
            let j_rot = jac.point * (-skew(&rx));
            // local 2x9 row block: [intrinsics | rotation | translation]
            let mut rows = [[0.0; 9]; 2];
            for r in 0..2 {
                for c in 0..3 {
                    rows[r][c] = jac.intrinsics[(r, c)];
                    rows[r][3 + c] = j_rot[(r, c)];
                    rows[r][6 + c] = jac.point[(r, c)];
                }
            }
            let index = |c: usize| if c < 3 { c } else { o + c - 3 };
            for a in 0..9 {
                let ia = index(a);
                g[ia] += w * (rows[0][a] * e[0] + rows[1][a] * e[1]);
                for b in a..9 {
                    let v = w * (rows[0][a] * rows[0][b] + rows[1][a] * rows[1][b]);
                    let ib = index(b);
                    h[(ia, ib)] += v;
                    if ia != ib {
                        h[(ib, ia)] += v;
                    }
                }
            }
        }
    }
    (h, g)
}

/// Objective `sum |e|^2` and its gradient in the tangent parameterisation of
/// [`Params::retract`].
pub fn objective_and_gradient(frames: &[CalibrationFrame], proj: Projection, params: &Params) -> (f64, DVector<f64>) {
    let cost = reprojection_cost(frames, proj, params).unwrap_or(f64::INFINITY);
    let (_, g) = normal_equations(frames, proj, params, Loss::Squared);
    (cost, g * 2.0)
}

struct LmOutcome {
    params: Params,
    converged: bool,
}

#[allow(clippy::too_many_arguments)]
fn levenberg_marquardt(
    frames: &[CalibrationFrame],
    proj: Projection,
    start: Params,
    loss: Loss,
    fix_intrinsics: bool,
    opts: &SolverOptions,
    pass: &str,
    trace: &mut Vec<TraceEntry>,
) -> LmOutcome {
    let mut params = start;
    let Some(mut cost) = loss_cost(frames, proj, &params, loss) else {
        return LmOutcome { params, converged: false };
    };
    let mut lambda = opts.initial_lambda;
    trace.push(TraceEntry { pass: pass.into(), iteration: 0, cost, lambda, accepted: true });

    for iteration in 1..=opts.max_iterations {
        let (mut h, mut g) = normal_equations(frames, proj, &params, loss);
        if fix_intrinsics {
            for i in 0..INTRINSIC_DOF {
                h.row_mut(i).fill(0.0);
                h.column_mut(i).fill(0.0);
                h[(i, i)] = 1.0;
                g[i] = 0.0;
            }
        }
        let diag: Vec<f64> = (0..h.nrows()).map(|i| h[(i, i)].max(1e-12)).collect();
        loop {
            let mut damped = h.clone();
            for (i, d) in diag.iter().enumerate() {
                damped[(i, i)] += lambda * d;
            }
            let step = damped.cholesky().map(|c| c.solve(&(-&g)));
            let candidate_cost = step.as_ref().and_then(|delta| {
                let cand = params.retract(delta);
                loss_cost(frames, proj, &cand, loss).map(|c| (cand, c))
            });
            match candidate_cost {
                Some((cand, new_cost)) if new_cost < cost => {
                    let rel = (cost - new_cost) / cost.max(f64::MIN_POSITIVE);
                    params = cand;
                    cost = new_cost;
                    lambda = (lambda / 10.0).max(1e-15);
                    trace.push(TraceEntry { pass: pass.into(), iteration, cost, lambda, accepted: true });
                    if rel < opts.relative_tolerance || cost < 1e-24 {
                        return LmOutcome { params, converged: true };
                    }
                    break;
                }
                _ => {
                    lambda *= 10.0;
                    trace.push(TraceEntry { pass: pass.into(), iteration, cost, lambda, accepted: false });
                    if lambda > LAMBDA_CEILING {
                        // no descent direction left at this point
                        return LmOutcome { params, converged: true };
                    }
                }
            }
        }
    }
    LmOutcome { params, converged: false }
}

fn unproject(proj: Projection, k: &Intrinsics, px: &[f64; 2]) -> Vector3<f64> {
    let dx = px[0] - k.cx;
    let dy = px[1] - k.cy;
    let r = dx.hypot(dy);
    let theta = proj
        .incidence(r, k.focal_px)
        .unwrap_or_else(|| proj.max_incidence().min(std::f64::consts::PI) * 0.999);
    let phi = dy.atan2(dx);
    Vector3::new(theta.cos(), theta.sin() * phi.cos(), -theta.sin() * phi.sin())
}

/// Rigid alignment `q ~ R p + t` (Kabsch).
fn kabsch(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> (Rotation3<f64>, Vector3<f64>) {
    let n = src.len() as f64;
    let cs = src.iter().sum::<Vector3<f64>>() / n;
    let cd = dst.iter().sum::<Vector3<f64>>() / n;
    let mut cov = Matrix3::zeros();
    for (p, q) in src.iter().zip(dst) {
        cov += (p - cs) * (q - cd).transpose();
    }
    let svd = SVD::new(cov, true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    let rot = Rotation3::from_matrix_unchecked(r);
    (rot, cd - rot * cs)
}

/// Per-frame pose from fixed intrinsics: back-project rays, place the board by
/// its angular extent, align, then refine the pose alone.
pub fn initial_pose(frame: &CalibrationFrame, proj: Projection, k: &Intrinsics) -> Pose {
    let rays: Vec<Vector3<f64>> = frame.image_points.iter().map(|px| unproject(proj, k, px)).collect();
    let board: Vec<Vector3<f64>> = frame.board_points.iter().map(|x| Vector3::from(*x)).collect();

    let (mut extent, mut angle) = (0.0, 0.0);
    for i in 0..board.len() {
        for j in i + 1..board.len() {
            let d = (board[i] - board[j]).norm();
            if d > extent {
                extent = d;
                angle = rays[i].angle(&rays[j]);
            }
        }
    }
    let depth = extent / (2.0 * (angle / 2.0).tan().max(1e-6));
    let mut pts: Vec<Vector3<f64>> = rays.iter().map(|r| r * depth).collect();
    let (mut rot, mut t) = kabsch(&board, &pts);
    for _ in 0..5 {
        let normal = rot * Vector3::z();
        let offset = normal.dot(&t);
        for (p, r) in pts.iter_mut().zip(&rays) {
            let denom = normal.dot(r);
            if denom.abs() > 1e-6 && offset / denom > 0.0 {
                *p = r * (offset / denom);
            }
        }
        (rot, t) = kabsch(&board, &pts);
    }

    let single = std::slice::from_ref(frame);
    let start = Params { intrinsics: *k, poses: vec![Pose::from_rotation(&rot, t)] };
    let opts = SolverOptions { max_iterations: 50, ..SolverOptions::default() };
    let mut scratch = Vec::new();
    let refined = levenberg_marquardt(single, proj, start, Loss::Squared, true, &opts, "pose-init", &mut scratch);
    refined.params.poses[0]
}

/// Initial intrinsics: optical centre at the crop centre and `f` from the
/// image-circle diameter and nominal field of view.
pub fn coarse_initialization(crop_size: [u32; 2], nominal_fov_deg: f64) -> Intrinsics {
    let diameter = crop_size[0].min(crop_size[1]) as f64;
    Intrinsics {
        cx: crop_size[0] as f64 / 2.0,
        cy: crop_size[1] as f64 / 2.0,
        focal_px: CameraModel::focal_from_diameter(diameter, nominal_fov_deg),
    }
}

pub fn bundle_adjust(
    frames: &[CalibrationFrame],
    projection: Projection,
    initial: &CameraModel,
) -> Result<CalibrationResult, CalibrationError> {
    let k = Intrinsics { cx: initial.optical_center[0], cy: initial.optical_center[1], focal_px: initial.focal_px };
    bundle_adjust_with(frames, projection, k, &SolverOptions::default())
}

pub fn bundle_adjust_with(
    frames: &[CalibrationFrame],
    projection: Projection,
    initial: Intrinsics,
    opts: &SolverOptions,
) -> Result<CalibrationResult, CalibrationError> {
    if frames.len() < 3 {
        return Err(CalibrationError::TooFewFrames(frames.len()));
    }
    for f in frames {
        f.validate()?;
    }
    let poses = frames.par_iter().map(|f| initial_pose(f, projection, &initial)).collect();
    let start = Params { intrinsics: initial, poses };
    let initial_rms = rms_px(frames, projection, &start);

    let mut trace = Vec::new();
    let first = levenberg_marquardt(frames, projection, start, Loss::Squared, false, opts, "squared", &mut trace);
    let mut params = first.params;
    let mut converged = first.converged;

    if converged && opts.robust_pass {
        // first round is scaled by the squared-loss RMS; later rounds by a
        // median-based scale that the outliers cannot inflate
        let mut scale = rms_px(frames, projection, &params);
        for _ in 0..MAX_ROBUST_ROUNDS {
            if !scale.is_finite() || scale <= 1e-9 {
                break;
            }
            let robust = levenberg_marquardt(frames, projection, params.clone(), Loss::SoftL1 { scale }, false, opts, "soft_l1", &mut trace);
            converged = robust.converged;
            params = robust.params;
            if !converged {
                break;
            }
            let next = median_scale(frames, projection, &params);
            if (next - scale).abs() <= 0.01 * scale {
                break;
            }
            scale = next;
        }
    }

    let result = CalibrationResult {
        projection,
        intrinsics: params.intrinsics,
        rms_reprojection_px: rms_px(frames, projection, &params),
        per_frame_poses: params.poses,
        initial_rms_px: initial_rms,
        per_model_rms: BTreeMap::new(),
        trace,
    };
    if !converged || !result.rms_reprojection_px.is_finite() {
        return Err(CalibrationError::NotConverged { best: Box::new(result) });
    }
    Ok(result)
}

/// Fits every lens model independently from the same starting intrinsics.
/// Failed fits are reported as infinite RMS.
pub fn compare_models(frames: &[CalibrationFrame], initial: Intrinsics, opts: &SolverOptions) -> BTreeMap<Projection, f64> {
    Projection::ALL
        .par_iter()
        .map(|&p| {
            let rms = bundle_adjust_with(frames, p, initial, opts)
                .map(|r| r.rms_reprojection_px)
                .unwrap_or(f64::INFINITY);
            (p, rms)
        })
        .collect()
}
