use super::{Mat3, Point3, Rotation3, Vec3};
use crate::{Error, Result};

/// Largest deviation from orthonormality accepted by [`validate_rotation`].
pub const ROTATION_TOL: f64 = 1e-9;

/// Checks that `m` is orthonormal with determinant +1 (within
/// [`ROTATION_TOL`] per entry of `m^T m - I`) and wraps it as a rotation.
pub fn validate_rotation(m: &Mat3) -> Result<Rotation3> {
    let gram = m.transpose() * m;
    let dev = (gram - Mat3::identity()).abs().max();
    if dev > ROTATION_TOL {
        return Err(Error::InvalidArgument(format!(
            "matrix is not orthonormal (max deviation {dev:.3e})"
        )));
    }
    if m.determinant() <= 0.0 {
        return Err(Error::InvalidArgument(
            "matrix has non-positive determinant (reflection, not rotation)".into(),
        ));
    }
    Ok(Rotation3::from_matrix_unchecked(*m))
}

/// Nearest rotation to an arbitrary matrix, via SVD with a sign correction
/// on the smallest singular vector when `U V^T` would be a reflection.
pub fn orthonormalize(m: &Mat3) -> Rotation3 {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd of 3x3 always yields u");
    let v_t = svd.v_t.expect("svd of 3x3 always yields v_t");
    let mut d = Mat3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    Rotation3::from_matrix_unchecked(u * d * v_t)
}

/// Rigid transform `p -> R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    pub rotation: Rotation3,
    pub translation: Vec3,
}

impl RigidPose {
    pub fn new(rotation: Rotation3, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self { rotation: Rotation3::identity(), translation: Vec3::zeros() }
    }

    #[inline]
    pub fn transform_point(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    #[inline]
    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let inv_rot = self.rotation.inverse();
        Self { rotation: inv_rot, translation: -(inv_rot * self.translation) }
    }

    /// `self.compose(&inner)` applies `inner` first, then `self`.
    pub fn compose(&self, inner: &Self) -> Self {
        Self {
            rotation: self.rotation * inner.rotation,
            translation: self.rotation * inner.translation + self.translation,
        }
    }
}

/// Similarity transform `p -> s R p + t` with `s > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sim3Transform {
    pub scale: f64,
    pub rotation: Rotation3,
    pub translation: Vec3,
}

impl Sim3Transform {
    /// Panics when `scale` is not positive and finite; transforms read from
    /// files are validated before reaching this constructor.
    pub fn new(scale: f64, rotation: Rotation3, translation: Vec3) -> Self {
        assert!(
            scale > 0.0 && scale.is_finite(),
            "similarity scale must be positive and finite, got {scale}"
        );
        Self { scale, rotation, translation }
    }

    pub fn identity() -> Self {
        Self { scale: 1.0, rotation: Rotation3::identity(), translation: Vec3::zeros() }
    }

    pub fn from_rigid(pose: &RigidPose) -> Self {
        Self { scale: 1.0, rotation: pose.rotation, translation: pose.translation }
    }

    pub fn inverse(&self) -> Self {
        let inv_rot = self.rotation.inverse();
        let inv_scale = 1.0 / self.scale;
        Self {
            scale: inv_scale,
            rotation: inv_rot,
            translation: -(inv_rot * self.translation) * inv_scale,
        }
    }
}

/// Applies a similarity transform to a point.
#[inline]
pub fn apply_sim3(t: &Sim3Transform, p: &Point3) -> Point3 {
    Point3::from(t.scale * (t.rotation * p.coords) + t.translation)
}

/// Composes two similarity transforms; the result applies `inner` first,
/// then `outer`, so `compose_sim3(a, b)` maps `p` to `a(b(p))`.
pub fn compose_sim3(outer: &Sim3Transform, inner: &Sim3Transform) -> Sim3Transform {
    Sim3Transform {
        scale: outer.scale * inner.scale,
        rotation: outer.rotation * inner.rotation,
        translation: outer.scale * (outer.rotation * inner.translation) + outer.translation,
    }
}
