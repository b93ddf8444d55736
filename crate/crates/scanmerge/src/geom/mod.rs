//! Core geometric types: points, rotations, rigid and similarity transforms,
//! pinhole cameras, triangle meshes, and colored point clouds.
//!
//! Conventions used throughout the crate:
//!
//! * Lengths are in meters, angles in radians.
//! * Rotations are orthonormal 3x3 matrices with determinant +1.
//! * Camera poses map world coordinates to camera coordinates
//!   (`p_cam = R * p_world + t`); the camera looks along +Z, with +X right
//!   and +Y down in the image.
//! * Pixel coordinates are continuous; pixel `(i, j)` covers the half-open
//!   square `[i, i+1) x [j, j+1)`, so a projection is inside the image when
//!   `0 <= u < width` and `0 <= v < height`.

mod mesh;
mod ray;
mod transform;

pub use mesh::{ColoredPointCloud, TriMesh};
pub use ray::ray_triangle_intersect;
pub use transform::{
    apply_sim3, compose_sim3, orthonormalize, validate_rotation, RigidPose, Sim3Transform,
};

/// 3D point in meters.
pub type Point3 = nalgebra::Point3<f64>;
/// 3D vector in meters (or unitless direction).
pub type Vec3 = nalgebra::Vector3<f64>;
/// 3x3 matrix.
pub type Mat3 = nalgebra::Matrix3<f64>;
/// Orthonormal rotation, stored as a 3x3 matrix.
pub type Rotation3 = nalgebra::Rotation3<f64>;

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Pinhole camera intrinsics. No distortion model: virtual views are rendered
/// distortion-free and captured views are assumed pre-undistorted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) || !fx.is_finite() || !fy.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "focal lengths must be positive and finite, got fx = {fx}, fy = {fy}"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image size must be nonzero, got {width} x {height}"
            )));
        }
        Ok(Self { fx, fy, cx, cy, width, height })
    }

    /// Projects a camera-frame point. `None` when the point is at or behind
    /// the camera plane (z <= 0).
    #[inline]
    pub fn project(&self, p_cam: &Vec3) -> Option<[f64; 2]> {
        if p_cam.z <= 0.0 {
            return None;
        }
        Some([
            self.fx * p_cam.x / p_cam.z + self.cx,
            self.fy * p_cam.y / p_cam.z + self.cy,
        ])
    }

    /// True when a continuous pixel coordinate falls inside the image.
    #[inline]
    pub fn contains(&self, pixel: [f64; 2]) -> bool {
        pixel[0] >= 0.0
            && pixel[0] < self.width as f64
            && pixel[1] >= 0.0
            && pixel[1] < self.height as f64
    }

    /// Camera-frame ray direction through a continuous pixel coordinate,
    /// scaled so its z component is 1.
    #[inline]
    pub fn ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }
}

/// How a view came to exist; kept with the camera so downstream stages can
/// treat captured and synthesized views differently.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CameraLabel {
    /// Photograph taken from the ground.
    CapturedGround,
    /// Photograph taken from the air.
    CapturedAerial,
    /// Rendered from a laser scan.
    Virtual,
}

/// A posed pinhole camera.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub intrinsics: CameraIntrinsics,
    /// World-to-camera transform.
    pub pose: RigidPose,
    pub label: CameraLabel,
}

impl CameraView {
    pub fn new(intrinsics: CameraIntrinsics, pose: RigidPose, label: CameraLabel) -> Self {
        Self { intrinsics, pose, label }
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Point3 {
        Point3::from(self.pose.rotation.inverse() * (-self.pose.translation))
    }

    /// Unit forward direction (+Z of the camera) in world coordinates.
    pub fn forward(&self) -> Vec3 {
        self.pose.rotation.inverse() * Vec3::z()
    }

    /// World point on the ray through continuous pixel `(u, v)` at camera
    /// depth `z = depth`.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Point3 {
        let p_cam = self.intrinsics.ray(u, v) * depth;
        self.pose.inverse().transform_point(&Point3::from(p_cam))
    }
}

/// Projects a world point through a camera. Errors when the point is at or
/// behind the camera plane; callers decide whether out-of-bounds pixels
/// matter.
pub fn project_point(camera: &CameraView, point: &Point3) -> Result<[f64; 2]> {
    let p_cam = camera.pose.transform_point(point);
    camera
        .intrinsics
        .project(&p_cam.coords)
        .ok_or(Error::BehindCamera { z: p_cam.z })
}
