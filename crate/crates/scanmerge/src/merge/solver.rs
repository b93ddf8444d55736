//! Levenberg-Marquardt solver for the joint merge problem.
//!
//! Two interchangeable linear-system backends solve the same damped normal
//! equations each iteration:
//!
//! * [`SolverKind::Schur`]: eliminates the 3x3 structure-point blocks first
//!   and solves the reduced camera/scan/scale system (the practical choice:
//!   points dominate parameter count).
//! * [`SolverKind::Dense`]: assembles the full normal matrix over all
//!   parameters. Quadratic memory in point count; intended for small
//!   problems and as an independent cross-check of the Schur path.
//!
//! Rotations update by left-multiplied exponentials and are pulled back to
//! exact orthonormality as part of every trial step. A step is accepted only
//! when the true robustified cost decreases, so the sequence of accepted
//! costs is strictly decreasing. Observations whose point starts behind the
//! camera are dropped up front (and counted); a trial step that pushes a
//! point behind a camera is rejected like any cost increase.

use super::{
    huber, huber_deriv, reprojection_jacobian, space_jacobian, target_position, MergeProblem,
    Observation, SpaceTarget,
};
use crate::geom::{orthonormalize, CameraView, Point3, RigidPose, Sim3Transform, Vec3};
use crate::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector, Matrix3, SMatrix, Vector3, Vector6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::AddAssign;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Reduced camera system via point elimination.
    Schur,
    /// Full dense normal equations.
    Dense,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub solver: SolverKind,
    /// Maximum accepted steps.
    pub max_iterations: usize,
    /// Stop when an accepted step reduces the cost by less than this
    /// fraction of the previous cost.
    pub cost_tol: f64,
    /// Stop when the gradient's infinity norm falls below this.
    pub gradient_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            solver: SolverKind::Schur,
            max_iterations: 100,
            cost_tol: 1e-12,
            gradient_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvergenceReason {
    /// Gradient vanished at the current state.
    GradientTolerance,
    /// An accepted step no longer reduced the cost meaningfully.
    CostTolerance,
    /// Iteration budget exhausted.
    MaxIterations,
    /// Damping grew past its ceiling without finding a downhill step.
    LambdaLimit,
}

/// What the solve did, in physical units where possible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    /// Accepted steps.
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    /// Unwhitened RMS pixel error over kept observations.
    pub initial_reprojection_rms_px: f64,
    pub final_reprojection_rms_px: f64,
    /// Unwhitened RMS metric error over space constraints.
    pub initial_space_rms_m: f64,
    pub final_space_rms_m: f64,
    pub convergence: ConvergenceReason,
    /// The initial cost followed by the cost after each accepted step;
    /// strictly decreasing by construction.
    pub cost_trace: Vec<f64>,
    /// Observations discarded because their point started behind the camera.
    pub dropped_observations: usize,
}

/// Refined estimates plus the solve report.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub cameras: Vec<CameraView>,
    pub points: Vec<Point3>,
    /// Per-scan transforms with the shared scale folded in.
    pub scans: Vec<Sim3Transform>,
    /// The shared scan scale.
    pub scale: f64,
    pub report: SolveReport,
}

#[derive(Clone)]
struct State {
    cams: Vec<RigidPose>,
    points: Vec<Point3>,
    scans: Vec<RigidPose>,
    log_scale: f64,
}

/// Offsets of parameter blocks inside the reduced (non-point) vector.
/// Camera 0 is frozen and has no block. Scan blocks and the scale slot exist
/// only while space terms are active.
#[derive(Clone, Copy)]
struct Layout {
    cam_dim: usize,
    pose_dim: usize,
    space_active: bool,
}

impl Layout {
    fn new(n_cams: usize, n_scans: usize, space_active: bool) -> Self {
        let cam_dim = 6 * n_cams.saturating_sub(1);
        let pose_dim = cam_dim + if space_active { 6 * n_scans + 1 } else { 0 };
        Self { cam_dim, pose_dim, space_active }
    }

    fn cam_offset(&self, j: usize) -> Option<usize> {
        (j > 0).then(|| 6 * (j - 1))
    }

    fn scan_offset(&self, i: usize) -> usize {
        self.cam_dim + 6 * i
    }

    fn scale_offset(&self) -> usize {
        self.pose_dim - 1
    }
}

/// One pose-block column strip of a point's off-diagonal Hessian block.
/// `rows` is 6 for camera/scan blocks and 1 for the scale slot; unused rows
/// of `m` stay zero, which keeps all arithmetic fixed-size.
#[derive(Clone)]
struct WBlock {
    offset: usize,
    rows: usize,
    m: SMatrix<f64, 6, 3>,
}

struct Blocks {
    h_pp: DMatrix<f64>,
    g_p: DVector<f64>,
    v: Vec<Matrix3<f64>>,
    g_l: Vec<Vector3<f64>>,
    w: Vec<Vec<WBlock>>,
    grad_inf: f64,
}

fn push_block(list: &mut Vec<WBlock>, offset: usize, rows: usize, m: SMatrix<f64, 6, 3>) {
    for b in list.iter_mut() {
        if b.offset == offset {
            b.m += m;
            return;
        }
    }
    list.push(WBlock { offset, rows, m });
}

/// Per-observation pieces computed in parallel, then folded sequentially in
/// observation order so the accumulated sums do not depend on thread count.
/// `sw` is the square root of the robust reweighting factor.
struct ReprojPiece {
    sw: f64,
    eval: super::ReprojEval,
}

struct SpacePiece {
    sw: f64,
    eval: super::SpaceEval,
}

struct CostParts {
    total: f64,
    raw_reproj_sq: f64,
    raw_space_sq: f64,
}

fn reproj_sigma(problem: &MergeProblem, obs: &Observation) -> f64 {
    problem.params.sigma_px * obs.feature_scale
}

/// Robustified cost at `state`, or `None` when some kept observation's point
/// fell behind its camera.
fn cost_only(problem: &MergeProblem, kept: &[Observation], state: &State) -> Option<CostParts> {
    let delta = problem.params.huber_delta;
    let per_obs: Vec<Option<(f64, f64)>> = kept
        .par_iter()
        .map(|obs| {
            let pose = &state.cams[obs.camera];
            let intr = &problem.cameras[obs.camera].intrinsics;
            let eval = reprojection_jacobian(
                pose,
                intr,
                &state.points[obs.point],
                obs.pixel,
                obs.feature_scale,
                problem.params.sigma_px,
            )?;
            let s = eval.residual.norm_squared();
            let sigma = reproj_sigma(problem, obs);
            Some((huber(s, delta), s * sigma * sigma))
        })
        .collect();
    let mut total = 0.0;
    let mut raw_reproj_sq = 0.0;
    for piece in per_obs {
        let (cost, raw) = piece?;
        total += cost;
        raw_reproj_sq += raw;
    }
    let mut raw_space_sq = 0.0;
    if layout_space_active(problem) {
        let scale = state.log_scale.exp();
        for c in &problem.constraints {
            let target = target_position(&c.target, &state.points);
            let eval = space_jacobian(
                &state.scans[c.scan],
                scale,
                &c.laser,
                &target,
                false,
                problem.params.sigma0_m,
                problem.params.k_d,
            );
            let s = eval.residual.norm_squared();
            let sigma = problem.params.sigma0_m + problem.params.k_d * c.laser.coords.norm();
            total += problem.params.omega * huber(s, delta);
            raw_space_sq += s * sigma * sigma;
        }
    }
    Some(CostParts { total, raw_reproj_sq, raw_space_sq })
}

fn layout_space_active(problem: &MergeProblem) -> bool {
    problem.params.omega > 0.0 && !problem.constraints.is_empty() && !problem.scans.is_empty()
}

/// Gradient and Gauss-Newton blocks at `state`. Callers only evaluate at
/// states already proven finite by [`cost_only`].
fn full_eval(problem: &MergeProblem, kept: &[Observation], state: &State, layout: &Layout) -> Blocks {
    let delta = problem.params.huber_delta;
    let reproj: Vec<ReprojPiece> = kept
        .par_iter()
        .map(|obs| {
            let eval = reprojection_jacobian(
                &state.cams[obs.camera],
                &problem.cameras[obs.camera].intrinsics,
                &state.points[obs.point],
                obs.pixel,
                obs.feature_scale,
                problem.params.sigma_px,
            )
            .expect("state was validated finite before full evaluation");
            let s = eval.residual.norm_squared();
            ReprojPiece { sw: huber_deriv(s, delta).sqrt(), eval }
        })
        .collect();

    let space: Vec<SpacePiece> = if layout.space_active {
        let scale = state.log_scale.exp();
        problem
            .constraints
            .par_iter()
            .map(|c| {
                let target = target_position(&c.target, &state.points);
                let eval = space_jacobian(
                    &state.scans[c.scan],
                    scale,
                    &c.laser,
                    &target,
                    matches!(c.target, SpaceTarget::Point(_)),
                    problem.params.sigma0_m,
                    problem.params.k_d,
                );
                let s = eval.residual.norm_squared();
                SpacePiece {
                    sw: (problem.params.omega * huber_deriv(s, delta)).sqrt(),
                    eval,
                }
            })
            .collect()
    } else {
        Vec::new()
    };

    let mut blocks = Blocks {
        h_pp: DMatrix::zeros(layout.pose_dim, layout.pose_dim),
        g_p: DVector::zeros(layout.pose_dim),
        v: vec![Matrix3::zeros(); state.points.len()],
        g_l: vec![Vector3::zeros(); state.points.len()],
        w: vec![Vec::new(); state.points.len()],
        grad_inf: 0.0,
    };

    for (obs, piece) in kept.iter().zip(&reproj) {
        let a = piece.eval.d_pose * piece.sw;
        let b = piece.eval.d_point * piece.sw;
        let r = piece.eval.residual * piece.sw;
        let k = obs.point;
        blocks.v[k] += b.transpose() * b;
        blocks.g_l[k] += b.transpose() * r;
        if let Some(off) = layout.cam_offset(obs.camera) {
            blocks
                .h_pp
                .view_mut((off, off), (6, 6))
                .add_assign(&(a.transpose() * a));
            blocks.g_p.rows_mut(off, 6).add_assign(&(a.transpose() * r));
            push_block(&mut blocks.w[k], off, 6, a.transpose() * b);
        }
    }

    for (c, piece) in problem.constraints.iter().zip(&space) {
        let a = piece.eval.d_scan * piece.sw;
        let a_s = piece.eval.d_log_scale * piece.sw;
        let r = piece.eval.residual * piece.sw;
        let so = layout.scan_offset(c.scan);
        let xo = layout.scale_offset();
        blocks
            .h_pp
            .view_mut((so, so), (6, 6))
            .add_assign(&(a.transpose() * a));
        let cross = a.transpose() * a_s;
        for row in 0..6 {
            blocks.h_pp[(so + row, xo)] += cross[row];
            blocks.h_pp[(xo, so + row)] += cross[row];
        }
        blocks.h_pp[(xo, xo)] += a_s.dot(&a_s);
        blocks.g_p.rows_mut(so, 6).add_assign(&(a.transpose() * r));
        blocks.g_p[xo] += a_s.dot(&r);
        if let (SpaceTarget::Point(k), Some(d_point)) = (&c.target, piece.eval.d_point) {
            let b = d_point * piece.sw;
            blocks.v[*k] += b.transpose() * b;
            blocks.g_l[*k] += b.transpose() * r;
            push_block(&mut blocks.w[*k], so, 6, a.transpose() * b);
            let mut strip = SMatrix::<f64, 6, 3>::zeros();
            strip.fixed_view_mut::<1, 3>(0, 0).copy_from(&(a_s.transpose() * b));
            push_block(&mut blocks.w[*k], xo, 1, strip);
        }
    }

    let pose_max = blocks.g_p.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    let point_max = blocks
        .g_l
        .iter()
        .flat_map(|g| g.iter())
        .fold(0.0f64, |m, g| m.max(g.abs()));
    blocks.grad_inf = pose_max.max(point_max);
    blocks
}

/// Marquardt damping with a floor so parameters that lost all their
/// measurements stay put instead of making the system singular.
fn damped(d: f64, lambda: f64) -> f64 {
    d + lambda * d.max(1e-9)
}

fn solve_schur(blocks: &Blocks, layout: &Layout, lambda: f64) -> Option<(DVector<f64>, Vec<Vector3<f64>>)> {
    let n = layout.pose_dim;
    let mut s = blocks.h_pp.clone();
    for j in 0..n {
        s[(j, j)] = damped(blocks.h_pp[(j, j)], lambda);
    }
    let mut rhs = -blocks.g_p.clone();
    let mut v_chol: Vec<Cholesky<f64, nalgebra::U3>> = Vec::with_capacity(blocks.v.len());
    for k in 0..blocks.v.len() {
        let mut vk = blocks.v[k];
        for j in 0..3 {
            vk[(j, j)] = damped(blocks.v[k][(j, j)], lambda);
        }
        let chol = Cholesky::new(vk)?;
        let y = chol.solve(&blocks.g_l[k]);
        let solved: Vec<SMatrix<f64, 3, 6>> = blocks.w[k]
            .iter()
            .map(|b| chol.solve(&b.m.transpose()))
            .collect();
        for b1 in &blocks.w[k] {
            let contrib = b1.m * y;
            for row in 0..b1.rows {
                rhs[b1.offset + row] += contrib[row];
            }
            for (b2, x) in blocks.w[k].iter().zip(&solved) {
                let c = b1.m * x;
                for r in 0..b1.rows {
                    for cidx in 0..b2.rows {
                        s[(b1.offset + r, b2.offset + cidx)] -= c[(r, cidx)];
                    }
                }
            }
        }
        v_chol.push(chol);
    }
    let dp = if n > 0 {
        s.cholesky()?.solve(&rhs)
    } else {
        rhs
    };
    let mut dl = Vec::with_capacity(blocks.v.len());
    for k in 0..blocks.v.len() {
        let chol = &v_chol[k];
        let mut wtdp = Vector3::zeros();
        for b in &blocks.w[k] {
            let mut seg = Vector6::zeros();
            for row in 0..b.rows {
                seg[row] = dp[b.offset + row];
            }
            wtdp += b.m.transpose() * seg;
        }
        dl.push(-chol.solve(&(blocks.g_l[k] + wtdp)));
    }
    Some((dp, dl))
}

fn solve_dense(blocks: &Blocks, layout: &Layout, lambda: f64) -> Option<(DVector<f64>, Vec<Vector3<f64>>)> {
    let np = layout.pose_dim;
    let nk = blocks.v.len();
    let n = np + 3 * nk;
    let mut h = DMatrix::zeros(n, n);
    h.view_mut((0, 0), (np, np)).copy_from(&blocks.h_pp);
    let mut g = DVector::zeros(n);
    g.rows_mut(0, np).copy_from(&blocks.g_p);
    for k in 0..nk {
        let base = np + 3 * k;
        h.view_mut((base, base), (3, 3)).copy_from(&blocks.v[k]);
        g.rows_mut(base, 3).copy_from(&blocks.g_l[k]);
        for b in &blocks.w[k] {
            for r in 0..b.rows {
                for c in 0..3 {
                    h[(b.offset + r, base + c)] += b.m[(r, c)];
                    h[(base + c, b.offset + r)] += b.m[(r, c)];
                }
            }
        }
    }
    for j in 0..n {
        h[(j, j)] = damped(h[(j, j)], lambda);
    }
    let delta = h.cholesky()?.solve(&(-&g));
    let dp = delta.rows(0, np).into_owned();
    let dl = (0..nk)
        .map(|k| Vector3::from(delta.fixed_rows::<3>(np + 3 * k)))
        .collect();
    Some((dp, dl))
}

/// Applies a parameter step. Rotations drift from orthonormality at rounding
/// level under exponential-map updates, so every updated rotation is pulled
/// back immediately; the cost of a trial state is then exactly the cost of
/// the state that would be stored on acceptance.
fn apply_step(
    state: &State,
    layout: &Layout,
    dp: &DVector<f64>,
    dl: &[Vector3<f64>],
) -> State {
    let mut next = state.clone();
    for (j, cam) in next.cams.iter_mut().enumerate() {
        if let Some(off) = layout.cam_offset(j) {
            let w = Vec3::new(dp[off], dp[off + 1], dp[off + 2]);
            let dt = Vec3::new(dp[off + 3], dp[off + 4], dp[off + 5]);
            cam.rotation = orthonormalize((nalgebra::Rotation3::new(w) * cam.rotation).matrix());
            cam.translation += dt;
        }
    }
    if layout.space_active {
        for (i, scan) in next.scans.iter_mut().enumerate() {
            let off = layout.scan_offset(i);
            let w = Vec3::new(dp[off], dp[off + 1], dp[off + 2]);
            let dt = Vec3::new(dp[off + 3], dp[off + 4], dp[off + 5]);
            scan.rotation = orthonormalize((nalgebra::Rotation3::new(w) * scan.rotation).matrix());
            scan.translation += dt;
        }
        next.log_scale += dp[layout.scale_offset()];
    }
    for (p, d) in next.points.iter_mut().zip(dl) {
        p.coords += d;
    }
    next
}

const LAMBDA_INIT: f64 = 1e-4;
const LAMBDA_MAX: f64 = 1e12;
const LAMBDA_MIN: f64 = 1e-12;

/// Jointly refines camera poses, points, scan placements, and the shared
/// scale. See the module docs for the objective.
pub fn solve(problem: &MergeProblem, options: &SolveOptions) -> Result<SolveOutcome> {
    problem.validate()?;
    if options.max_iterations == 0 {
        return Err(Error::InvalidArgument("max_iterations must be nonzero".into()));
    }

    let space_active = layout_space_active(problem);
    let layout = Layout::new(problem.cameras.len(), problem.scans.len(), space_active);

    let init_state = State {
        cams: problem.cameras.iter().map(|c| c.pose).collect(),
        points: problem.points.clone(),
        scans: problem
            .scans
            .iter()
            .map(|t| RigidPose::new(t.rotation, t.translation))
            .collect(),
        log_scale: problem.initial_scale().ln(),
    };

    // Observations starting behind their camera cannot produce a residual;
    // drop them once, up front.
    let mut kept = Vec::with_capacity(problem.observations.len());
    let mut dropped = 0usize;
    for obs in &problem.observations {
        let p = init_state.cams[obs.camera].transform_point(&problem.points[obs.point]);
        if p.z > 0.0 {
            kept.push(obs.clone());
        } else {
            dropped += 1;
        }
    }
    if kept.is_empty() {
        return Err(Error::InvalidProblem(
            "every observation starts behind its camera".into(),
        ));
    }

    let n_obs = kept.len() as f64;
    let n_con = problem.constraints.len().max(1) as f64;
    let initial = cost_only(problem, &kept, &init_state)
        .expect("behind-camera observations were dropped above");

    let mut state = init_state;
    let mut cost = initial.total;
    let mut cost_trace = vec![initial.total];
    let mut lambda = LAMBDA_INIT;
    let mut iterations = 0usize;
    let mut reason = None;

    let solve_system = |blocks: &Blocks, lambda: f64| match options.solver {
        SolverKind::Schur => solve_schur(blocks, &layout, lambda),
        SolverKind::Dense => solve_dense(blocks, &layout, lambda),
    };

    while reason.is_none() {
        if iterations >= options.max_iterations {
            reason = Some(ConvergenceReason::MaxIterations);
            break;
        }
        let blocks = full_eval(problem, &kept, &state, &layout);
        if blocks.grad_inf <= options.gradient_tol {
            reason = Some(ConvergenceReason::GradientTolerance);
            break;
        }
        loop {
            let Some((dp, dl)) = solve_system(&blocks, lambda) else {
                lambda *= 10.0;
                if lambda > LAMBDA_MAX {
                    reason = Some(ConvergenceReason::LambdaLimit);
                    break;
                }
                continue;
            };
            let trial = apply_step(&state, &layout, &dp, &dl);
            let trial_cost = cost_only(problem, &kept, &trial).map(|c| c.total);
            match trial_cost {
                Some(new_cost) if new_cost < cost => {
                    let drop = cost - new_cost;
                    state = trial;
                    cost = new_cost;
                    cost_trace.push(new_cost);
                    lambda = (lambda / 3.0).max(LAMBDA_MIN);
                    iterations += 1;
                    if drop <= options.cost_tol * cost.max(f64::MIN_POSITIVE) {
                        reason = Some(ConvergenceReason::CostTolerance);
                    }
                    break;
                }
                _ => {
                    lambda *= 4.0;
                    if lambda > LAMBDA_MAX {
                        reason = Some(ConvergenceReason::LambdaLimit);
                        break;
                    }
                }
            }
        }
    }

    let final_parts = cost_only(problem, &kept, &state)
        .expect("accepted states always evaluate to finite cost");
    let scale = state.log_scale.exp();
    let cameras = problem
        .cameras
        .iter()
        .zip(&state.cams)
        .map(|(c, pose)| CameraView::new(c.intrinsics, *pose, c.label))
        .collect();
    let scans = if space_active {
        state
            .scans
            .iter()
            .map(|rt| Sim3Transform::new(scale, rt.rotation, rt.translation))
            .collect()
    } else {
        problem.scans.clone()
    };
    Ok(SolveOutcome {
        cameras,
        points: state.points.clone(),
        scans,
        scale,
        report: SolveReport {
            iterations,
            initial_cost: initial.total,
            final_cost: final_parts.total,
            initial_reprojection_rms_px: (initial.raw_reproj_sq / n_obs).sqrt(),
            final_reprojection_rms_px: (final_parts.raw_reproj_sq / n_obs).sqrt(),
            initial_space_rms_m: (initial.raw_space_sq / n_con).sqrt(),
            final_space_rms_m: (final_parts.raw_space_sq / n_con).sqrt(),
            convergence: reason.expect("loop exits only with a reason"),
            cost_trace,
            dropped_observations: dropped,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{CameraIntrinsics, CameraLabel, Rotation3};
    use crate::merge::{MergeParams, SpaceConstraint, SpaceTarget};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    /// Mirrors the evaluator's arithmetic exactly so synthetic observations
    /// start with residuals of exactly zero, not rounding-level noise.
    fn exact_projection(pose: &RigidPose, intr: &CameraIntrinsics, point: &Point3) -> [f64; 2] {
        let p = pose.rotation * point.coords + pose.translation;
        let inv_z = 1.0 / p.z;
        [
            intr.fx * p.x * inv_z + intr.cx,
            intr.fy * p.y * inv_z + intr.cy,
        ]
    }

    /// A consistent joint problem whose initial state is the exact ground
    /// truth: 3 cameras, 12 points, 2 scans with anchor and live constraints.
    /// At `s_true = 1` every residual is exactly zero.
    fn truth_problem(s_true: f64) -> MergeProblem {
        let intr = CameraIntrinsics::new(400.0, 400.0, 250.0, 250.0, 500, 500).unwrap();
        let cam_poses = [
            RigidPose::identity(),
            RigidPose::new(
                Rotation3::from_euler_angles(0.02, -0.08, 0.01),
                Vec3::new(-1.2, 0.1, 0.3),
            ),
            RigidPose::new(
                Rotation3::from_euler_angles(-0.05, 0.06, -0.02),
                Vec3::new(0.9, -0.4, 0.2),
            ),
        ];
        let cameras: Vec<CameraView> = cam_poses
            .iter()
            .map(|p| CameraView::new(intr, *p, CameraLabel::CapturedGround))
            .collect();

        let scan_poses = [
            RigidPose::new(
                Rotation3::from_euler_angles(0.2, -0.1, 0.3),
                Vec3::new(0.5, -0.3, 1.0),
            ),
            RigidPose::new(
                Rotation3::from_euler_angles(-0.15, 0.25, 0.05),
                Vec3::new(-0.8, 0.2, 2.0),
            ),
        ];
        let scans: Vec<Sim3Transform> = scan_poses
            .iter()
            .map(|p| Sim3Transform::new(s_true, p.rotation, p.translation))
            .collect();

        // Structure points are derived from scan-frame laser points by the
        // same forward map the space evaluator uses, so live constraints are
        // exactly consistent.
        let mut points = Vec::new();
        let mut constraints = Vec::new();
        let mut k = 0usize;
        for (i, sp) in scan_poses.iter().enumerate() {
            for a in 0..3 {
                for b in 0..2 {
                    let desired = Point3::new(
                        -1.5 + a as f64 + 0.3 * i as f64,
                        -0.8 + 1.4 * b as f64,
                        7.0 + 0.4 * ((a + b + i) % 3) as f64,
                    );
                    let laser = Point3::from(
                        sp.rotation.inverse() * ((desired.coords - sp.translation) / s_true),
                    );
                    let rotated = sp.rotation * laser.coords;
                    let x = Point3::from(s_true * rotated + sp.translation);
                    points.push(x);
                    constraints.push(SpaceConstraint {
                        scan: i,
                        laser,
                        target: SpaceTarget::Point(k),
                    });
                    k += 1;
                }
            }
            for l in [
                Point3::new(2.0, 0.0, 1.0),
                Point3::new(0.0, 2.0, -1.0),
                Point3::new(-1.0, -1.0, 2.0),
                Point3::new(1.0, 1.0, 1.5),
            ] {
                let rotated = sp.rotation * l.coords;
                let target = Point3::from(s_true * rotated + sp.translation);
                constraints.push(SpaceConstraint {
                    scan: i,
                    laser: l,
                    target: SpaceTarget::Anchor(target),
                });
            }
        }

        let mut observations = Vec::new();
        for (k, p) in points.iter().enumerate() {
            for (j, pose) in cam_poses.iter().enumerate() {
                observations.push(Observation {
                    camera: j,
                    point: k,
                    pixel: exact_projection(pose, &intr, p),
                    feature_scale: if (j + k) % 3 == 0 { 2.0 } else { 1.0 },
                });
            }
        }

        MergeProblem {
            cameras,
            points,
            scans,
            observations,
            constraints,
            params: MergeParams::default(),
        }
    }

    fn small_vec(rng: &mut ChaCha12Rng, mag: f64) -> Vec3 {
        Vec3::new(
            rng.random_range(-mag..mag),
            rng.random_range(-mag..mag),
            rng.random_range(-mag..mag),
        )
    }

    /// Perturbs everything the solver is allowed to move; camera 0 stays at
    /// the truth because it is the gauge.
    fn perturbed(problem: &MergeProblem, seed: u64) -> MergeProblem {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut p = problem.clone();
        for cam in p.cameras.iter_mut().skip(1) {
            cam.pose.rotation = Rotation3::new(small_vec(&mut rng, 0.02)) * cam.pose.rotation;
            cam.pose.translation += small_vec(&mut rng, 0.05);
        }
        for pt in &mut p.points {
            pt.coords += small_vec(&mut rng, 0.05);
        }
        for (i, scan) in p.scans.iter_mut().enumerate() {
            let s_noise = if i % 2 == 0 { 0.97 } else { 1.03 };
            *scan = Sim3Transform::new(
                scan.scale * s_noise,
                Rotation3::new(small_vec(&mut rng, 0.03)) * scan.rotation,
                scan.translation + small_vec(&mut rng, 0.08),
            );
        }
        p
    }

    #[test]
    fn consistent_problem_at_truth_converges_immediately() {
        let problem = truth_problem(1.0);
        for solver in [SolverKind::Schur, SolverKind::Dense] {
            let options = SolveOptions { solver, ..SolveOptions::default() };
            let out = solve(&problem, &options).unwrap();
            assert_eq!(out.report.convergence, ConvergenceReason::GradientTolerance);
            assert!(out.report.iterations <= 1, "took {} iterations", out.report.iterations);
            assert!(out.report.final_cost < 1e-18, "final cost {}", out.report.final_cost);
            assert!(out.report.final_reprojection_rms_px < 1e-12);
            assert!(out.report.final_space_rms_m < 1e-12);
            for (a, b) in out.points.iter().zip(&problem.points) {
                assert_relative_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn perturbed_problem_recovers_ground_truth() {
        let truth = truth_problem(1.05);
        let problem = perturbed(&truth, 7);
        let out = solve(&problem, &SolveOptions::default()).unwrap();
        assert!(out.report.iterations >= 1);
        assert!(
            out.report.final_cost < 1e-12,
            "final cost {} after {} iterations ({:?})",
            out.report.final_cost,
            out.report.iterations,
            out.report.convergence
        );
        assert_relative_eq!(out.scale, 1.05, epsilon = 1e-7);
        for (a, b) in out.points.iter().zip(&truth.points) {
            assert_relative_eq!(a, b, epsilon = 1e-6);
        }
        for (a, b) in out.cameras.iter().zip(&truth.cameras) {
            assert_relative_eq!(a.pose.translation, b.pose.translation, epsilon = 1e-6);
            assert!(
                (a.pose.rotation.matrix() - b.pose.rotation.matrix()).abs().max() < 1e-6
            );
        }
        for (a, b) in out.scans.iter().zip(&truth.scans) {
            assert_relative_eq!(a.translation, b.translation, epsilon = 1e-6);
            assert!((a.rotation.matrix() - b.rotation.matrix()).abs().max() < 1e-6);
        }
        // Camera 0 is the gauge and must not have moved at all.
        assert_eq!(out.cameras[0].pose, truth.cameras[0].pose);
    }

    #[test]
    fn accepted_costs_decrease_strictly() {
        let problem = perturbed(&truth_problem(1.05), 11);
        let out = solve(&problem, &SolveOptions::default()).unwrap();
        let trace = &out.report.cost_trace;
        assert_eq!(trace.len(), out.report.iterations + 1);
        assert_eq!(trace[0], out.report.initial_cost);
        for w in trace.windows(2) {
            assert!(w[1] < w[0], "cost went {} -> {}", w[0], w[1]);
        }
        assert_eq!(*trace.last().unwrap(), out.report.final_cost);
    }

    #[test]
    fn schur_and_dense_backends_agree() {
        let problem = perturbed(&truth_problem(1.05), 3);
        // One accepted step from the same start must match to solver precision.
        let one = SolveOptions { max_iterations: 1, ..SolveOptions::default() };
        let s1 = solve(&problem, &SolveOptions { solver: SolverKind::Schur, ..one }).unwrap();
        let d1 = solve(&problem, &SolveOptions { solver: SolverKind::Dense, ..one }).unwrap();
        assert_eq!(s1.report.iterations, 1);
        assert_eq!(d1.report.iterations, 1);
        for (a, b) in s1.points.iter().zip(&d1.points) {
            assert_relative_eq!(a, b, epsilon = 1e-9);
        }
        assert_relative_eq!(s1.scale, d1.scale, epsilon = 1e-12);
        assert_relative_eq!(s1.report.final_cost, d1.report.final_cost, max_relative = 1e-9);
        // Full solves land on the same minimum.
        let sf = solve(&problem, &SolveOptions { solver: SolverKind::Schur, ..SolveOptions::default() }).unwrap();
        let df = solve(&problem, &SolveOptions { solver: SolverKind::Dense, ..SolveOptions::default() }).unwrap();
        for (a, b) in sf.points.iter().zip(&df.points) {
            assert_relative_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn zero_omega_reduces_to_bundle_adjustment() {
        let with_scans = {
            let mut p = perturbed(&truth_problem(1.0), 5);
            p.params.omega = 0.0;
            p
        };
        let without_scans = {
            let mut p = with_scans.clone();
            p.scans.clear();
            p.constraints.clear();
            p
        };
        let a = solve(&with_scans, &SolveOptions::default()).unwrap();
        let b = solve(&without_scans, &SolveOptions::default()).unwrap();
        for (pa, pb) in a.points.iter().zip(&b.points) {
            assert_relative_eq!(pa, pb, epsilon = 1e-12);
        }
        for (ca, cb) in a.cameras.iter().zip(&b.cameras) {
            assert_relative_eq!(ca.pose.translation, cb.pose.translation, epsilon = 1e-12);
        }
        // Scan placements are frozen when their terms carry no weight.
        assert_eq!(a.scans, with_scans.scans);
        assert_relative_eq!(a.scale, with_scans.initial_scale(), epsilon = 1e-15);
    }

    #[test]
    fn behind_camera_observations_are_dropped_and_counted() {
        let mut problem = perturbed(&truth_problem(1.0), 9);
        let extra = problem.points.len();
        problem.points.push(Point3::new(0.0, 0.0, -5.0));
        problem.observations.push(Observation {
            camera: 0,
            point: extra,
            pixel: [250.0, 250.0],
            feature_scale: 1.0,
        });
        let out = solve(&problem, &SolveOptions::default()).unwrap();
        assert_eq!(out.report.dropped_observations, 1);
        // With no surviving measurements the point must not move.
        assert_eq!(out.points[extra], problem.points[extra]);
        assert!(out.report.final_cost < 1e-12);
    }

    #[test]
    fn all_observations_behind_camera_is_an_error() {
        let mut problem = truth_problem(1.0);
        problem.constraints.clear();
        problem.scans.clear();
        for p in &mut problem.points {
            p.z = -p.z;
        }
        assert!(matches!(
            solve(&problem, &SolveOptions::default()),
            Err(Error::InvalidProblem(_))
        ));
    }
}
