//! Task-space, joint-space and force quantities shared across the controller.

use nalgebra::{Matrix3, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};

/// Sine and cosine from `libm`. Optimized builds may fuse the std calls into
/// one `sincos`, whose last bit can differ, so logs would depend on the build profile.
pub fn sin_cos(a: f64) -> (f64, f64) {
    (libm::sin(a), libm::cos(a))
}

/// Location of the mobile platform: two translations in the X_f–Z_f plane and
/// two rotations (about Y, then about the rotated Z).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    /// m
    pub x: f64,
    /// m
    pub z: f64,
    /// rad, rotation about Y
    pub theta: f64,
    /// rad, rotation about Z
    pub psi: f64,
}

impl Pose {
    pub const fn new(x: f64, z: f64, theta: f64, psi: f64) -> Self {
        Self { x, z, theta, psi }
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.x, self.z, self.theta, self.psi)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.z, self.theta, self.psi]
    }

    /// Position of the mobile origin O_m. The y-translation is constrained to zero.
    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.x, 0.0, self.z)
    }

    /// Platform orientation `Rot_y(theta) * Rot_z(psi)`.
    pub fn rotation(&self) -> Matrix3<f64> {
        let (st, ct) = sin_cos(self.theta);
        let (sp, cp) = sin_cos(self.psi);
        Matrix3::new(ct * cp, -ct * sp, st, sp, cp, 0.0, -st * cp, st * sp, ct)
    }

    /// World direction of the second rotation axis, `Rot_y(theta) * z`.
    pub fn psi_axis(&self) -> Vector3<f64> {
        let (st, ct) = sin_cos(self.theta);
        Vector3::new(st, 0.0, ct)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Pose) -> f64 {
        (self.to_vector() - other.to_vector()).amax()
    }
}

/// Actuator lengths `[q13, q23, q33, q42]` in metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct JointVector(pub [f64; 4]);

impl JointVector {
    pub const fn new(q: [f64; 4]) -> Self {
        Self(q)
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::from(self.0)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self([v[0], v[1], v[2], v[3]])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter()
    }

    pub fn max_abs_diff(&self, other: &JointVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Index<usize> for JointVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for JointVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Forces and moments in the four controlled directions `[Fx, Fz, My, Mz]`
/// (N, N, N·m, N·m).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ForceVector {
    pub fx: f64,
    pub fz: f64,
    pub my: f64,
    pub mz: f64,
}

impl ForceVector {
    pub const ZERO: ForceVector = ForceVector::new(0.0, 0.0, 0.0, 0.0);

    pub const fn new(fx: f64, fz: f64, my: f64, mz: f64) -> Self {
        Self { fx, fz, my, mz }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.fx, self.fz, self.my, self.mz]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_array(self.to_array().map(|v| v * s))
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

impl std::ops::Sub for ForceVector {
    type Output = ForceVector;
    fn sub(self, rhs: ForceVector) -> ForceVector {
        ForceVector::new(
            self.fx - rhs.fx,
            self.fz - rhs.fz,
            self.my - rhs.my,
            self.mz - rhs.mz,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_is_proper_orthonormal() {
        let p = Pose::new(0.0, 0.7, 0.3, -1.1);
        let r = p.rotation();
        assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-14);
        assert!((r.determinant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rotation_matches_axis_angle_product() {
        use nalgebra::Rotation3;
        let p = Pose::new(0.0, 0.7, -0.35, 0.8);
        let ry = Rotation3::from_axis_angle(&Vector3::y_axis(), p.theta);
        let rz = Rotation3::from_axis_angle(&Vector3::z_axis(), p.psi);
        assert!(((ry * rz).into_inner() - p.rotation()).amax() < 1e-15);
    }

    #[test]
    fn psi_axis_is_rotated_z() {
        let p = Pose::new(0.0, 0.7, 0.4, 0.9);
        let z = p.rotation() * Vector3::z();
        assert!((z - p.psi_axis()).norm() < 1e-15);
    }

    #[test]
    fn position_has_no_y_component() {
        assert_eq!(Pose::new(0.1, 0.7, 0.0, 0.0).position(), Vector3::new(0.1, 0.0, 0.7));
    }
}
