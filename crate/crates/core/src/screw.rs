//! Screws, transmission wrenches, output twist screws and the Ω proximity index.

use crate::error::{KinematicsError, ScrewError};
use crate::geometry::RobotGeometry;
use crate::kinematics::{self, limb_frames};
use crate::types::Pose;
use nalgebra::{Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

/// Actuator pairs `(i, j)` (zero-based) in the order used by every Ω vector.
pub const PAIRS: [(usize, usize); 6] = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];

/// Sentinel angle for a pair whose output twist has no rotational part.
pub const UNDEFINED_PAIR_DEG: f64 = 180.0;

const MIN_ANGULAR_NORM: f64 = 1e-9;
const CONDITION_LIMIT: f64 = 1e10;
const DET_RATIO_LIMIT: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScrewKind {
    Twist,
    Wrench,
}

/// A screw in ray coordinates about O_m.
///
/// Twists store `(omega; v)`, wrenches store `(f; m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Screw {
    pub primary: Vector3<f64>,
    pub secondary: Vector3<f64>,
    pub kind: ScrewKind,
}

impl Screw {
    pub fn twist(omega: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self {
            primary: omega,
            secondary: v,
            kind: ScrewKind::Twist,
        }
    }

    pub fn wrench(force: Vector3<f64>, moment: Vector3<f64>) -> Self {
        Self {
            primary: force,
            secondary: moment,
            kind: ScrewKind::Wrench,
        }
    }

    /// Scales the screw so its primary part has unit norm.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.primary.norm();
        if n < MIN_ANGULAR_NORM || !n.is_finite() {
            return None;
        }
        Some(Self {
            primary: self.primary / n,
            secondary: self.secondary / n,
            kind: self.kind,
        })
    }
}

/// `omega . m + v . f`
pub fn reciprocal_product(twist: &Screw, wrench: &Screw) -> f64 {
    debug_assert_eq!(twist.kind, ScrewKind::Twist);
    debug_assert_eq!(wrench.kind, ScrewKind::Wrench);
    twist.primary.dot(&wrench.secondary) + twist.secondary.dot(&wrench.primary)
}

pub fn transmission_wrenches(pose: &Pose, geometry: &RobotGeometry) -> Result<[Screw; 4], KinematicsError> {
    let limbs = limb_frames(pose, geometry)?;
    Ok(limbs.map(|l| Screw::wrench(l.direction, l.moment_arm.cross(&l.direction))))
}

/// Maps a task-space rate `(xdot, zdot, thetadot, psidot)` to a spatial twist at O_m.
pub fn task_rate_to_twist(pose: &Pose, rate: &Vector4<f64>) -> Screw {
    let omega = Vector3::y() * rate[2] + pose.psi_axis() * rate[3];
    Screw::twist(omega, Vector3::new(rate[0], 0.0, rate[1]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputTwists {
    /// Task-space rate per unit rate of each actuator (columns of `-J_D^-1 J_I`).
    pub task_rates: [Vector4<f64>; 4],
    /// Normalized twists; `None` where the rotational part vanishes.
    pub twists: [Option<Screw>; 4],
    pub det: f64,
    pub condition: f64,
    /// Set when the condition number exceeded the limit and a clamped
    /// pseudo-inverse was used.
    pub near_singular: bool,
}

impl OutputTwists {
    pub fn twist(&self, limb: usize) -> Result<Screw, ScrewError> {
        self.twists[limb].ok_or(ScrewError::UndefinedDirection { limb: limb + 1 })
    }
}

fn solve_rates(jd: &Matrix4<f64>, ji: &Matrix4<f64>) -> (Matrix4<f64>, f64, bool) {
    let svd = jd.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    let rhs = -ji;
    if condition <= CONDITION_LIMIT {
        if let Some(inv) = jd.try_inverse() {
            return (inv * rhs, condition, false);
        }
    }
    let floor = smax * 1e-10;
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let mut sinv = Matrix4::zeros();
    for k in 0..4 {
        sinv[(k, k)] = 1.0 / svd.singular_values[k].max(floor);
    }
    (vt.transpose() * sinv * u.transpose() * rhs, condition, true)
}

pub fn output_twists(pose: &Pose, geometry: &RobotGeometry) -> Result<OutputTwists, KinematicsError> {
    let j = kinematics::jacobians(pose, geometry)?;
    let (rates, condition, near_singular) = solve_rates(&j.forward, &j.inverse);
    let task_rates = [0, 1, 2, 3].map(|i| rates.column(i).into_owned());
    let twists = task_rates.map(|r| task_rate_to_twist(pose, &r).normalized());
    Ok(OutputTwists {
        task_rates,
        twists,
        det: j.forward.determinant(),
        condition,
        near_singular,
    })
}

/// The six pairwise angles between output-twist axes, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OmegaVector {
    pub angles: [f64; 6],
    pub min: f64,
    pub min_index: usize,
    /// One-based actuator pair at `min_index`.
    pub pair: (usize, usize),
}

impl OmegaVector {
    pub fn from_angles(angles: [f64; 6]) -> Self {
        let mut min_index = 0;
        for k in 1..6 {
            if angles[k] < angles[min_index] {
                min_index = k;
            }
        }
        let (i, j) = PAIRS[min_index];
        Self {
            angles,
            min: angles[min_index],
            min_index,
            pair: (i + 1, j + 1),
        }
    }

    /// Angle for a zero-based pair index into [`PAIRS`].
    pub fn angle(&self, pair_index: usize) -> f64 {
        self.angles[pair_index]
    }
}

/// Angle in degrees between two unit vectors, signed dot clamped to [-1, 1].
pub fn axis_angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
}

pub fn omega_from_twists(twists: &[Option<Screw>; 4]) -> [f64; 6] {
    PAIRS.map(|(i, j)| match (twists[i], twists[j]) {
        (Some(a), Some(b)) => axis_angle_deg(&a.primary, &b.primary),
        _ => UNDEFINED_PAIR_DEG,
    })
}

/// Ω indices at `pose`. When `|det J_D|` falls below `1e-12` of its home value
/// the reported minimum is forced to zero.
pub fn omega_indices(pose: &Pose, geometry: &RobotGeometry) -> Result<OmegaVector, KinematicsError> {
    omega_indices_with_reference(pose, geometry, geometry.reference_det())
}

/// As [`omega_indices`] with a precomputed home-pose determinant.
pub fn omega_indices_with_reference(
    pose: &Pose,
    geometry: &RobotGeometry,
    reference_det: f64,
) -> Result<OmegaVector, KinematicsError> {
    let ots = output_twists(pose, geometry)?;
    let mut omega = OmegaVector::from_angles(omega_from_twists(&ots.twists));
    if ots.det.abs() < DET_RATIO_LIMIT * reference_det.abs() {
        omega.min = 0.0;
    }
    Ok(omega)
}

/// Ω of one pair (zero-based pair index) without the full vector.
pub fn pair_omega(pose: &Pose, geometry: &RobotGeometry, pair_index: usize) -> Result<f64, KinematicsError> {
    let ots = output_twists(pose, geometry)?;
    Ok(omega_from_twists(&ots.twists)[pair_index])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::symmetric_geometry;
    use approx::assert_abs_diff_eq;

    #[test]
    fn reciprocal_product_basic_cases() {
        let z = Vector3::z();
        let x = Vector3::x();
        let o = Vector3::zeros();
        assert_eq!(reciprocal_product(&Screw::twist(z, o), &Screw::wrench(z, o)), 0.0);
        assert_eq!(reciprocal_product(&Screw::twist(o, x), &Screw::wrench(x, o)), 1.0);
        assert_eq!(reciprocal_product(&Screw::twist(z, o), &Screw::wrench(o, z)), 1.0);
    }

    #[test]
    fn wrenches_at_vertical_pose() {
        let g = symmetric_geometry();
        let w = transmission_wrenches(&Pose::new(0.0, 0.7, 0.0, 0.0), &g).unwrap();
        assert!((w[3].primary - Vector3::z()).norm() < 1e-15);
        assert_eq!(w[3].secondary, Vector3::zeros());
        let expected = Vector3::new(-0.1, 0.0, 0.7) / 0.7071068;
        assert!((w[0].primary - expected).norm() < 1e-7);
        for s in &w {
            assert_abs_diff_eq!(s.primary.dot(&s.secondary), 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(s.primary.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn omega_parallel_and_orthogonal() {
        assert_eq!(axis_angle_deg(&Vector3::z(), &Vector3::z()), 0.0);
        assert_abs_diff_eq!(axis_angle_deg(&Vector3::z(), &Vector3::x()), 90.0, epsilon = 1e-12);
        // rounding past 1 must not produce NaN
        let a = Vector3::new(1.0 + 1e-16, 0.0, 0.0);
        assert_eq!(axis_angle_deg(&a, &a), 0.0);
    }

    #[test]
    fn undefined_direction_gets_sentinel() {
        let t = Some(Screw::twist(Vector3::z(), Vector3::zeros()));
        let angles = omega_from_twists(&[t, None, t, t]);
        assert_eq!(angles[0], UNDEFINED_PAIR_DEG);
        assert_eq!(angles[1], 0.0);
        assert_eq!(angles[3], UNDEFINED_PAIR_DEG);
    }

    #[test]
    fn min_index_ties_take_lowest() {
        let o = OmegaVector::from_angles([30.0, 10.0, 40.0, 10.0, 50.0, 60.0]);
        assert_eq!(o.min_index, 1);
        assert_eq!(o.pair, (1, 3));
        assert_eq!(o.min, 10.0);
    }

    #[test]
    fn mirror_pose_gives_mirrored_lateral_twists() {
        let g = symmetric_geometry();
        let ots = output_twists(&Pose::new(0.01, 0.74, 0.1, 0.0), &g).unwrap();
        let a = ots.twist(1).unwrap().primary;
        let b = ots.twist(2).unwrap().primary;
        // angular velocity is axial: reflecting y flips the in-plane components
        assert!((a - Vector3::new(-b.x, b.y, -b.z)).norm() < 1e-9);
    }

    #[test]
    fn pure_translation_twist_is_undefined() {
        let s = Screw::twist(Vector3::zeros(), Vector3::x());
        assert!(s.normalized().is_none());
        let ots = OutputTwists {
            task_rates: [Vector4::zeros(); 4],
            twists: [None; 4],
            det: 1.0,
            condition: 1.0,
            near_singular: false,
        };
        assert_eq!(ots.twist(2), Err(ScrewError::UndefinedDirection { limb: 3 }));
    }
}
