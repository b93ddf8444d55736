//! Joint refinement of camera poses, structure, and scan placements.
//!
//! The merge stage minimizes a two-part robust objective over camera poses
//! `R_j, t_j`, structure points `X_k`, per-scan rigid placements `R_i, t_i`,
//! and one global scan scale `s`:
//!
//! * Reprojection terms: whitened pixel error of each feature observation,
//!   with per-observation sigma `sigma_px * feature_scale`.
//! * Space terms: whitened 3D error `s R_i X_laser + t_i - X_target`, with
//!   sigma growing linearly in the point's distance from the scanner
//!   (`sigma0 + k_d * d`). The target is either a live structure point
//!   (moving with the reconstruction as it refines) or a fixed anchor.
//!
//! Both parts go through the same Huber loss on the squared whitened norm;
//! the space side is multiplied by a balance weight `omega`, chosen by
//! [`compute_omega`] so the two parts start out contributing equally.
//!
//! Camera intrinsics are fixed; only poses, points, scan placements, and the
//! global scale move. The first camera is frozen to pin the reconstruction
//! frame (scale stays observable through the anchored space terms).

mod solver;

pub use solver::{
    solve, ConvergenceReason, SolveOptions, SolveOutcome, SolveReport, SolverKind,
};

use crate::geom::{CameraIntrinsics, CameraView, Point3, RigidPose, Sim3Transform};
use crate::{Error, Result};
use nalgebra::{SMatrix, Vector2, Vector3};
use serde::{Deserialize, Serialize};

/// A 2D feature observation of a structure point in one camera.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub camera: usize,
    pub point: usize,
    /// Measured pixel position.
    pub pixel: [f64; 2],
    /// Detection scale; multiplies the pixel sigma, so coarse features
    /// count for less.
    pub feature_scale: f64,
}

/// What a scan point is matched against in the reconstruction frame.
#[derive(Debug, Clone, PartialEq)]
pub enum SpaceTarget {
    /// Live structure point by index; the constraint follows the point as
    /// it is refined.
    Point(usize),
    /// Fixed position in the reconstruction frame.
    Anchor(Point3),
}

/// A 3D-3D constraint tying a point in a scan's own frame to the
/// reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceConstraint {
    pub scan: usize,
    /// Point in the scan's own frame; its norm is the distance from the
    /// scanner, which drives the measurement sigma.
    pub laser: Point3,
    pub target: SpaceTarget,
}

/// Noise model and balance weight for the joint objective.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MergeParams {
    /// Pixel sigma at feature scale 1.
    pub sigma_px: f64,
    /// Base 3D sigma in meters.
    pub sigma0_m: f64,
    /// 3D sigma growth per meter of scanner distance.
    pub k_d: f64,
    /// Huber threshold on the whitened residual norm.
    pub huber_delta: f64,
    /// Weight on the robustified space terms. Zero disables them (the solve
    /// degenerates to standard bundle adjustment and scan placements stay
    /// fixed).
    pub omega: f64,
}

impl Default for MergeParams {
    fn default() -> Self {
        Self { sigma_px: 1.0, sigma0_m: 1e-3, k_d: 1e-5, huber_delta: 1.0, omega: 1.0 }
    }
}

/// The full joint problem: initial estimates plus measurements.
#[derive(Debug, Clone)]
pub struct MergeProblem {
    /// Initial camera views; intrinsics are held fixed, camera 0's pose too.
    pub cameras: Vec<CameraView>,
    /// Initial structure points in the reconstruction frame.
    pub points: Vec<Point3>,
    /// Initial per-scan similarity transforms (scan frame to reconstruction
    /// frame), typically from coarse registration. Their rotations and
    /// translations seed the per-scan placements; their scales seed the
    /// single global scale via geometric mean.
    pub scans: Vec<Sim3Transform>,
    pub observations: Vec<Observation>,
    pub constraints: Vec<SpaceConstraint>,
    pub params: MergeParams,
}

impl MergeProblem {
    /// Initial value of the shared scan scale: the geometric mean of the
    /// per-scan coarse scales.
    pub fn initial_scale(&self) -> f64 {
        if self.scans.is_empty() {
            return 1.0;
        }
        (self.scans.iter().map(|t| t.scale.ln()).sum::<f64>() / self.scans.len() as f64).exp()
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        for (name, v) in [
            ("sigma_px", p.sigma_px),
            ("sigma0_m", p.sigma0_m),
            ("huber_delta", p.huber_delta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidProblem(format!("{name} must be positive, got {v}")));
            }
        }
        if !(p.k_d >= 0.0 && p.k_d.is_finite()) {
            return Err(Error::InvalidProblem(format!("k_d must be nonnegative, got {}", p.k_d)));
        }
        if !(p.omega >= 0.0 && p.omega.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "omega must be nonnegative, got {}",
                p.omega
            )));
        }
        if self.cameras.is_empty() {
            return Err(Error::InvalidProblem("no cameras".into()));
        }
        if self.points.is_empty() {
            return Err(Error::InvalidProblem("no points".into()));
        }
        if self.observations.is_empty() {
            return Err(Error::InvalidProblem("no observations".into()));
        }
        let mut camera_seen = vec![false; self.cameras.len()];
        let mut point_seen = vec![false; self.points.len()];
        for (i, o) in self.observations.iter().enumerate() {
            if o.camera >= self.cameras.len() {
                return Err(Error::InvalidProblem(format!(
                    "observation {i} references camera {} of {}",
                    o.camera,
                    self.cameras.len()
                )));
            }
            if o.point >= self.points.len() {
                return Err(Error::InvalidProblem(format!(
                    "observation {i} references point {} of {}",
                    o.point,
                    self.points.len()
                )));
            }
            if !(o.feature_scale > 0.0 && o.feature_scale.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "observation {i} has feature scale {}",
                    o.feature_scale
                )));
            }
            if !o.pixel.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidProblem(format!("observation {i} has non-finite pixel")));
            }
            camera_seen[o.camera] = true;
            point_seen[o.point] = true;
        }
        let mut scan_seen = vec![false; self.scans.len()];
        for (i, c) in self.constraints.iter().enumerate() {
            if c.scan >= self.scans.len() {
                return Err(Error::InvalidProblem(format!(
                    "constraint {i} references scan {} of {}",
                    c.scan,
                    self.scans.len()
                )));
            }
            if let SpaceTarget::Point(k) = c.target {
                if k >= self.points.len() {
                    return Err(Error::InvalidProblem(format!(
                        "constraint {i} references point {k} of {}",
                        self.points.len()
                    )));
                }
                point_seen[k] = true;
            }
            scan_seen[c.scan] = true;
        }
        // Every free parameter needs at least one measurement; otherwise its
        // normal-equation block is identically zero.
        if let Some(j) = camera_seen.iter().skip(1).position(|&s| !s) {
            return Err(Error::InvalidProblem(format!("camera {} has no observations", j + 1)));
        }
        if let Some(k) = point_seen.iter().position(|&s| !s) {
            return Err(Error::InvalidProblem(format!(
                "point {k} has no observations or live constraints"
            )));
        }
        if let Some(i) = scan_seen.iter().position(|&s| !s) {
            return Err(Error::InvalidProblem(format!("scan {i} has no constraints")));
        }
        Ok(())
    }
}

/// Huber loss on a squared whitened residual norm `s`: identity inside
/// `delta^2`, switching to `2 delta sqrt(s) - delta^2` beyond, so large
/// residuals grow linearly in the residual norm.
pub fn huber(s: f64, delta: f64) -> f64 {
    let d2 = delta * delta;
    if s <= d2 {
        s
    } else {
        2.0 * delta * s.sqrt() - d2
    }
}

/// First derivative of [`huber`] with respect to `s`; the per-residual
/// weight in iteratively reweighted least squares.
pub fn huber_deriv(s: f64, delta: f64) -> f64 {
    let d2 = delta * delta;
    if s <= d2 {
        1.0
    } else {
        delta / s.sqrt()
    }
}

/// Whitened reprojection residual and its Jacobian blocks.
///
/// `d_pose` is with respect to a left-multiplicative rotation increment and
/// a translation increment `[w, dt]` on the camera pose; `d_point` is with
/// respect to the structure point.
#[derive(Debug, Clone, Copy)]
pub struct ReprojEval {
    pub residual: Vector2<f64>,
    pub d_pose: SMatrix<f64, 2, 6>,
    pub d_point: SMatrix<f64, 2, 3>,
}

/// Evaluates one reprojection residual with Jacobians. `None` when the point
/// sits at or behind the camera plane.
pub fn reprojection_jacobian(
    pose: &RigidPose,
    intrinsics: &CameraIntrinsics,
    point: &Point3,
    pixel: [f64; 2],
    feature_scale: f64,
    sigma_px: f64,
) -> Option<ReprojEval> {
    let p = pose.rotation * point.coords + pose.translation;
    if p.z <= 0.0 {
        return None;
    }
    let w = 1.0 / (sigma_px * feature_scale);
    let inv_z = 1.0 / p.z;
    let pred_u = intrinsics.fx * p.x * inv_z + intrinsics.cx;
    let pred_v = intrinsics.fy * p.y * inv_z + intrinsics.cy;
    let residual = Vector2::new(w * (pixel[0] - pred_u), w * (pixel[1] - pred_v));
    // d(projection)/d(camera-frame point), scaled by -w for the residual.
    let j_proj = SMatrix::<f64, 2, 3>::new(
        intrinsics.fx * inv_z,
        0.0,
        -intrinsics.fx * p.x * inv_z * inv_z,
        0.0,
        intrinsics.fy * inv_z,
        -intrinsics.fy * p.y * inv_z * inv_z,
    ) * (-w);
    // d(camera point)/d(rotation increment) = -[R X]x; R X = p - t.
    let rx = p - pose.translation;
    let skew = SMatrix::<f64, 3, 3>::new(
        0.0, -rx.z, rx.y,
        rx.z, 0.0, -rx.x,
        -rx.y, rx.x, 0.0,
    );
    let mut d_pose = SMatrix::<f64, 2, 6>::zeros();
    d_pose.fixed_view_mut::<2, 3>(0, 0).copy_from(&(j_proj * (-skew)));
    d_pose.fixed_view_mut::<2, 3>(0, 3).copy_from(&j_proj);
    let d_point = j_proj * pose.rotation.matrix();
    Some(ReprojEval { residual, d_pose, d_point })
}

/// Whitened reprojection residual of one observation against a camera view.
/// Errors when the point is at or behind the camera plane.
pub fn reprojection_residual(
    camera: &CameraView,
    point: &Point3,
    obs: &Observation,
    sigma_px: f64,
) -> Result<Vector2<f64>> {
    reprojection_jacobian(
        &camera.pose,
        &camera.intrinsics,
        point,
        obs.pixel,
        obs.feature_scale,
        sigma_px,
    )
    .map(|e| e.residual)
    .ok_or_else(|| {
        let z = (camera.pose.rotation * point.coords + camera.pose.translation).z;
        Error::BehindCamera { z }
    })
}

/// Whitened space residual and its Jacobian blocks.
///
/// `d_scan` is with respect to `[w, dt]` on the scan placement,
/// `d_log_scale` with respect to the logarithm of the shared scale, and
/// `d_point` (live targets only) with respect to the target structure point.
#[derive(Debug, Clone, Copy)]
pub struct SpaceEval {
    pub residual: Vector3<f64>,
    pub d_scan: SMatrix<f64, 3, 6>,
    pub d_log_scale: Vector3<f64>,
    /// Present only for live targets: `-weight * I`.
    pub d_point: Option<SMatrix<f64, 3, 3>>,
}

/// Evaluates one space residual with Jacobians.
pub fn space_jacobian(
    scan: &RigidPose,
    scale: f64,
    laser: &Point3,
    target: &Point3,
    live_target: bool,
    sigma0_m: f64,
    k_d: f64,
) -> SpaceEval {
    let w = 1.0 / (sigma0_m + k_d * laser.coords.norm());
    let rotated = scan.rotation * laser.coords;
    let mapped = scale * rotated + scan.translation;
    let residual = w * (mapped - target.coords);
    let srx = scale * rotated;
    let skew = SMatrix::<f64, 3, 3>::new(
        0.0, -srx.z, srx.y,
        srx.z, 0.0, -srx.x,
        -srx.y, srx.x, 0.0,
    );
    let mut d_scan = SMatrix::<f64, 3, 6>::zeros();
    d_scan.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-w * skew));
    d_scan.fixed_view_mut::<3, 3>(0, 3).copy_from(&SMatrix::<f64, 3, 3>::identity().scale(w));
    SpaceEval {
        residual,
        d_scan,
        d_log_scale: w * srx,
        d_point: live_target.then(|| SMatrix::<f64, 3, 3>::identity().scale(-w)),
    }
}

/// Whitened space residual: `(s R laser + t - target) / (sigma0 + k_d d)`
/// with `d` the laser point's distance from the scanner.
pub fn space_residual(
    scan: &RigidPose,
    scale: f64,
    laser: &Point3,
    target: &Point3,
    sigma0_m: f64,
    k_d: f64,
) -> Vector3<f64> {
    space_jacobian(scan, scale, laser, target, false, sigma0_m, k_d).residual
}

/// Resolves a constraint's target position against the current points.
pub(crate) fn target_position(target: &SpaceTarget, points: &[Point3]) -> Point3 {
    match target {
        SpaceTarget::Point(k) => points[*k],
        SpaceTarget::Anchor(p) => *p,
    }
}

/// Robustified reprojection cost at the problem's initial state, skipping
/// behind-camera observations.
fn initial_reprojection_cost(problem: &MergeProblem) -> f64 {
    let mut sum = 0.0;
    for obs in &problem.observations {
        let cam = &problem.cameras[obs.camera];
        if let Some(eval) = reprojection_jacobian(
            &cam.pose,
            &cam.intrinsics,
            &problem.points[obs.point],
            obs.pixel,
            obs.feature_scale,
            problem.params.sigma_px,
        ) {
            sum += huber(eval.residual.norm_squared(), problem.params.huber_delta);
        }
    }
    sum
}

/// Robustified (unweighted) space cost at the problem's initial state.
fn initial_space_cost(problem: &MergeProblem) -> f64 {
    let scale = problem.initial_scale();
    let mut sum = 0.0;
    for c in &problem.constraints {
        let scan = &problem.scans[c.scan];
        let scan_rigid = RigidPose::new(scan.rotation, scan.translation);
        let target = target_position(&c.target, &problem.points);
        let r = space_residual(
            &scan_rigid,
            scale,
            &c.laser,
            &target,
            problem.params.sigma0_m,
            problem.params.k_d,
        );
        sum += huber(r.norm_squared(), problem.params.huber_delta);
    }
    sum
}

/// Balance weight that makes the robustified reprojection and space costs
/// equal at the problem's initial state: the ratio of their initial sums.
/// Multiplying the result by powers of ten trades image fidelity against
/// scan fidelity.
///
/// Errors when the problem has no space constraints or their initial cost is
/// zero (nothing to balance against).
pub fn compute_omega(problem: &MergeProblem) -> Result<f64> {
    problem.validate()?;
    if problem.constraints.is_empty() {
        return Err(Error::InvalidProblem(
            "cannot balance terms: problem has no space constraints".into(),
        ));
    }
    let e_space = initial_space_cost(problem);
    if e_space == 0.0 {
        return Err(Error::InvalidProblem(
            "cannot balance terms: initial space cost is zero".into(),
        ));
    }
    Ok(initial_reprojection_cost(problem) / e_space)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{CameraLabel, Rotation3, Vec3};
    use approx::assert_relative_eq;

    #[test]
    fn huber_is_continuous_and_linear_beyond_delta() {
        let delta = 1.5;
        let d2 = delta * delta;
        assert_relative_eq!(huber(d2 - 1e-12, delta), huber(d2 + 1e-12, delta), epsilon = 1e-9);
        assert_eq!(huber(1.0, delta), 1.0);
        // rho(s) = 2 delta sqrt(s) - delta^2 beyond the corner.
        assert_relative_eq!(huber(9.0, 1.0), 2.0 * 3.0 - 1.0, epsilon = 1e-12);
        // Derivative matches a finite difference on both sides.
        for s in [0.3, 5.0] {
            let h = 1e-6;
            let fd = (huber(s + h, 1.0) - huber(s - h, 1.0)) / (2.0 * h);
            assert_relative_eq!(huber_deriv(s, 1.0), fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn whitening_scales_residuals_inversely() {
        let cam = CameraView::new(
            CameraIntrinsics::new(300.0, 300.0, 200.0, 150.0, 400, 300).unwrap(),
            RigidPose::identity(),
            CameraLabel::CapturedGround,
        );
        let obs = Observation { camera: 0, point: 0, pixel: [210.0, 150.0], feature_scale: 1.0 };
        let p = Point3::new(0.0, 0.0, 5.0);
        let r1 = reprojection_residual(&cam, &p, &obs, 1.0).unwrap();
        let r2 = reprojection_residual(&cam, &p, &obs, 2.0).unwrap();
        assert_relative_eq!(r1.norm_squared(), 4.0 * r2.norm_squared(), epsilon = 1e-12);
        let coarse = Observation { feature_scale: 2.0, ..obs.clone() };
        let r3 = reprojection_residual(&cam, &p, &coarse, 1.0).unwrap();
        assert_relative_eq!(r2, r3, epsilon = 1e-15);
    }

    #[test]
    fn behind_camera_is_an_error() {
        let cam = CameraView::new(
            CameraIntrinsics::new(300.0, 300.0, 200.0, 150.0, 400, 300).unwrap(),
            RigidPose::identity(),
            CameraLabel::CapturedGround,
        );
        let obs = Observation { camera: 0, point: 0, pixel: [0.0, 0.0], feature_scale: 1.0 };
        let r = reprojection_residual(&cam, &Point3::new(0.0, 0.0, -1.0), &obs, 1.0);
        assert!(matches!(r, Err(Error::BehindCamera { .. })));
    }

    #[test]
    fn space_residual_zero_at_exact_match() {
        let scan = RigidPose::new(Rotation3::from_euler_angles(0.1, 0.2, 0.3), Vec3::new(1.0, 2.0, 3.0));
        let laser = Point3::new(4.0, -1.0, 0.5);
        let scale = 1.3;
        let target = Point3::from(scale * (scan.rotation * laser.coords) + scan.translation);
        let r = space_residual(&scan, scale, &laser, &target, 1e-3, 1e-5);
        assert!(r.norm() < 1e-12);
    }

    #[test]
    fn space_whitening_grows_with_scanner_distance() {
        let scan = RigidPose::identity();
        let near = Point3::new(1.0, 0.0, 0.0);
        let far = Point3::new(100.0, 0.0, 0.0);
        let off = Vec3::new(0.0, 0.01, 0.0);
        let sigma0 = 1e-3;
        let k_d = 1e-4;
        let r_near = space_residual(&scan, 1.0, &near, &(near + off), sigma0, k_d);
        let r_far = space_residual(&scan, 1.0, &far, &(far + off), sigma0, k_d);
        // Same metric error, but the far point is trusted less.
        assert!(r_far.norm() < r_near.norm());
        let expected_ratio = (sigma0 + k_d * 1.0) / (sigma0 + k_d * 100.0);
        assert_relative_eq!(r_far.norm() / r_near.norm(), expected_ratio, epsilon = 1e-12);
    }

    #[test]
    fn reprojection_jacobian_matches_finite_differences() {
        let intr = CameraIntrinsics::new(320.0, 340.0, 200.0, 160.0, 400, 320).unwrap();
        let pose = RigidPose::new(
            Rotation3::from_euler_angles(0.1, -0.2, 0.05),
            Vec3::new(0.3, -0.1, 0.4),
        );
        let point = Point3::new(0.4, -0.7, 6.0);
        let pixel = [190.0, 170.0];
        let (fs, sigma) = (1.5, 0.8);
        let eval = reprojection_jacobian(&pose, &intr, &point, pixel, fs, sigma).unwrap();
        let h = 1e-6;
        let residual_at = |pose: &RigidPose, point: &Point3| {
            reprojection_jacobian(pose, &intr, point, pixel, fs, sigma)
                .unwrap()
                .residual
        };
        for i in 0..6 {
            let mut d = [0.0; 6];
            d[i] = h;
            let step = |sign: f64| {
                let w = sign * Vec3::new(d[0], d[1], d[2]);
                let dt = sign * Vec3::new(d[3], d[4], d[5]);
                RigidPose::new(Rotation3::new(w) * pose.rotation, pose.translation + dt)
            };
            let fd = (residual_at(&step(1.0), &point) - residual_at(&step(-1.0), &point))
                / (2.0 * h);
            assert_relative_eq!(
                eval.d_pose.column(i).into_owned(),
                fd,
                epsilon = 1e-5,
                max_relative = 1e-5
            );
        }
        for i in 0..3 {
            let mut dp = Vec3::zeros();
            dp[i] = h;
            let fd = (residual_at(&pose, &(point + dp)) - residual_at(&pose, &(point - dp)))
                / (2.0 * h);
            assert_relative_eq!(
                eval.d_point.column(i).into_owned(),
                fd,
                epsilon = 1e-5,
                max_relative = 1e-5
            );
        }
    }

    #[test]
    fn space_jacobian_matches_finite_differences() {
        let scan = RigidPose::new(
            Rotation3::from_euler_angles(0.3, -0.1, 0.2),
            Vec3::new(1.0, -2.0, 0.5),
        );
        let scale = 1.3;
        let laser = Point3::new(2.0, 1.0, -0.5);
        let target = Point3::new(3.1, -0.9, 0.7);
        let (sigma0, k_d) = (1e-3, 1e-4);
        let eval = space_jacobian(&scan, scale, &laser, &target, true, sigma0, k_d);
        let h = 1e-7;
        for i in 0..6 {
            let mut d = [0.0; 6];
            d[i] = h;
            let at = |sign: f64| {
                let w = sign * Vec3::new(d[0], d[1], d[2]);
                let dt = sign * Vec3::new(d[3], d[4], d[5]);
                let moved = RigidPose::new(Rotation3::new(w) * scan.rotation, scan.translation + dt);
                space_residual(&moved, scale, &laser, &target, sigma0, k_d)
            };
            let fd = (at(1.0) - at(-1.0)) / (2.0 * h);
            assert_relative_eq!(
                eval.d_scan.column(i).into_owned(),
                fd,
                epsilon = 1e-4,
                max_relative = 1e-5
            );
        }
        // Scale parameter is the logarithm of the shared scale.
        let at_log = |sign: f64| {
            space_residual(&scan, scale * (sign * h).exp(), &laser, &target, sigma0, k_d)
        };
        let fd = (at_log(1.0) - at_log(-1.0)) / (2.0 * h);
        assert_relative_eq!(eval.d_log_scale, fd, epsilon = 1e-4, max_relative = 1e-5);
        for i in 0..3 {
            let mut dp = Vec3::zeros();
            dp[i] = h;
            let fd = (space_residual(&scan, scale, &laser, &(target + dp), sigma0, k_d)
                - space_residual(&scan, scale, &laser, &(target - dp), sigma0, k_d))
                / (2.0 * h);
            assert_relative_eq!(
                eval.d_point.unwrap().column(i).into_owned(),
                fd,
                epsilon = 1e-4,
                max_relative = 1e-5
            );
        }
    }

    #[test]
    fn omega_balances_initial_costs() {
        // Hand-built tiny problem with nonzero residuals on both sides.
        let intr = CameraIntrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100).unwrap();
        let cameras = vec![
            CameraView::new(intr, RigidPose::identity(), CameraLabel::CapturedGround),
            CameraView::new(
                intr,
                RigidPose::new(Rotation3::identity(), Vec3::new(-1.0, 0.0, 0.0)),
                CameraLabel::CapturedGround,
            ),
        ];
        let points = vec![Point3::new(0.1, -0.2, 4.0), Point3::new(-0.3, 0.2, 5.0)];
        let mut observations = Vec::new();
        for (k, p) in points.iter().enumerate() {
            for (j, cam) in cameras.iter().enumerate() {
                let px = crate::geom::project_point(cam, p).unwrap();
                observations.push(Observation {
                    camera: j,
                    point: k,
                    pixel: [px[0] + 0.7, px[1] - 0.4],
                    feature_scale: 1.0,
                });
            }
        }
        let scans = vec![Sim3Transform::identity()];
        let constraints = vec![
            SpaceConstraint {
                scan: 0,
                laser: Point3::new(1.0, 2.0, 3.0),
                target: SpaceTarget::Anchor(Point3::new(1.001, 2.0, 3.0)),
            },
            SpaceConstraint {
                scan: 0,
                laser: Point3::new(-2.0, 1.0, 4.0),
                target: SpaceTarget::Point(0),
            },
        ];
        let problem = MergeProblem {
            cameras,
            points,
            scans,
            observations,
            constraints,
            params: MergeParams::default(),
        };
        let omega = compute_omega(&problem).unwrap();
        let ratio = initial_reprojection_cost(&problem) / (omega * initial_space_cost(&problem));
        assert_relative_eq!(ratio, 1.0, epsilon = 1e-12);
    }
}
