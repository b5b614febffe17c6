//! Inverse and forward kinematics, velocity Jacobians and joint-angle
//! quantities of the 3UPS+RPU mechanism.
//!
//! External limb `l` joins fixed anchor `B_l` to the mobile anchor `a_l`,
//! which sits at `p + R a_l` in the world. The central limb joins `D0` to the
//! mobile origin `p = (x, 0, z)`. Closure residuals are
//! `|p + R a_l - B_l|^2 - q_l^2` and `|p - D0|^2 - q_4^2`.

use crate::error::KinematicsError;
use crate::geometry::RobotGeometry;
use crate::types::{sin_cos, JointVector, Pose};
use nalgebra::{Matrix4, Vector3, Vector4};

const MIN_LIMB_LENGTH: f64 = 1e-12;
const UNIVERSAL_EPS: f64 = 1e-9;

/// Per-limb quantities at a pose, all expressed in the fixed frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimbFrame {
    /// World position of the limb's mobile attachment (O_m for the central limb).
    pub attachment: Vector3<f64>,
    /// Unit vector from the fixed anchor to the attachment.
    pub direction: Vector3<f64>,
    pub length: f64,
    /// Vector from O_m to the attachment; zero for the central limb.
    pub moment_arm: Vector3<f64>,
}

/// Passive joint angles (rad).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassiveJoints {
    /// `[q_l1, q_l2]` for the three external limbs.
    pub universal: [[f64; 2]; 3],
    /// Central revolute joint.
    pub q41: f64,
    /// Set where `sin q_l2 = 0` and `q_l1` cannot be recovered.
    pub indeterminate: [bool; 3],
}

impl PassiveJoints {
    pub fn check(&self) -> Result<(), KinematicsError> {
        match self.indeterminate.iter().position(|f| *f) {
            Some(l) => Err(KinematicsError::UniversalAngleSingularity { limb: l + 1 }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IkSolution {
    pub joints: JointVector,
    pub passive: PassiveJoints,
    pub limbs: [LimbFrame; 4],
}

/// Universal-joint limb direction from its two revolute angles.
pub fn universal_direction(q1: f64, q2: f64) -> Vector3<f64> {
    let (s1, c1) = sin_cos(q1);
    let (s2, c2) = sin_cos(q2);
    Vector3::new(c1 * s2, -c2, s1 * s2)
}

/// Central-limb direction from its revolute angle.
pub fn central_direction(q41: f64) -> Vector3<f64> {
    let (s, c) = sin_cos(q41);
    Vector3::new(-s, 0.0, c)
}

/// Inverse of [`universal_direction`]; `None` when `sin q2` vanishes.
pub fn universal_angles(direction: &Vector3<f64>) -> (f64, f64, bool) {
    let q2 = (-direction.y).clamp(-1.0, 1.0).acos();
    let sin_q2 = direction.x.hypot(direction.z);
    if sin_q2 < UNIVERSAL_EPS {
        (0.0, q2, true)
    } else {
        (direction.z.atan2(direction.x), q2, false)
    }
}

pub fn central_angle(direction: &Vector3<f64>) -> f64 {
    (-direction.x).atan2(direction.z)
}

pub fn limb_frames(pose: &Pose, geometry: &RobotGeometry) -> Result<[LimbFrame; 4], KinematicsError> {
    if !pose.is_finite() {
        return Err(KinematicsError::NonFinite);
    }
    let p = pose.position();
    let rot = pose.rotation();
    let frame = |limb: usize, attachment: Vector3<f64>, moment_arm: Vector3<f64>| {
        let d = attachment - geometry.fixed_anchors[limb];
        let length = d.norm();
        if length < MIN_LIMB_LENGTH {
            return Err(KinematicsError::DegeneratePose { limb: limb + 1 });
        }
        Ok(LimbFrame {
            attachment,
            direction: d / length,
            length,
            moment_arm,
        })
    };
    let mut out = [LimbFrame {
        attachment: p,
        direction: Vector3::z(),
        length: 0.0,
        moment_arm: Vector3::zeros(),
    }; 4];
    for l in 0..3 {
        let arm = rot * geometry.mobile_anchors[l];
        out[l] = frame(l, p + arm, arm)?;
    }
    out[3] = frame(3, p, Vector3::zeros())?;
    Ok(out)
}

pub fn inverse_kinematics(pose: &Pose, geometry: &RobotGeometry) -> Result<IkSolution, KinematicsError> {
    let limbs = limb_frames(pose, geometry)?;
    let mut universal = [[0.0; 2]; 3];
    let mut indeterminate = [false; 3];
    for l in 0..3 {
        let (q1, q2, flag) = universal_angles(&limbs[l].direction);
        universal[l] = [q1, q2];
        indeterminate[l] = flag;
    }
    Ok(IkSolution {
        joints: JointVector([limbs[0].length, limbs[1].length, limbs[2].length, limbs[3].length]),
        passive: PassiveJoints {
            universal,
            q41: central_angle(&limbs[3].direction),
            indeterminate,
        },
        limbs,
    })
}

/// Actuator lengths only.
pub fn joint_lengths(pose: &Pose, geometry: &RobotGeometry) -> Result<JointVector, KinematicsError> {
    inverse_kinematics(pose, geometry).map(|s| s.joints)
}

/// Loop-closure residuals (m^2) of `pose` against `joints`.
pub fn closure_residuals(pose: &Pose, joints: &JointVector, geometry: &RobotGeometry) -> Vector4<f64> {
    let p = pose.position();
    let rot = pose.rotation();
    let mut r = Vector4::zeros();
    for l in 0..3 {
        let d = p + rot * geometry.mobile_anchors[l] - geometry.fixed_anchors[l];
        r[l] = d.norm_squared() - joints[l] * joints[l];
    }
    r[3] = (p - geometry.fixed_anchors[3]).norm_squared() - joints[3] * joints[3];
    r
}

/// Velocity Jacobians in `J_D * Xdot + J_I * qdot = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobians {
    /// Forward Jacobian `J_D` (rows: limbs, columns: `x, z, theta, psi`).
    pub forward: Matrix4<f64>,
    /// Inverse Jacobian `J_I`; with unit-direction rows this is `-I`.
    pub inverse: Matrix4<f64>,
}

fn forward_rows(pose: &Pose, limbs: &[LimbFrame; 4]) -> Matrix4<f64> {
    let wy = Vector3::y();
    let wz = pose.psi_axis();
    let mut jd = Matrix4::zeros();
    for (l, limb) in limbs.iter().enumerate().take(3) {
        let s = limb.direction;
        let r = limb.moment_arm;
        jd[(l, 0)] = s.x;
        jd[(l, 1)] = s.z;
        jd[(l, 2)] = s.dot(&wy.cross(&r));
        jd[(l, 3)] = s.dot(&wz.cross(&r));
    }
    let s4 = limbs[3].direction;
    jd[(3, 0)] = s4.x;
    jd[(3, 1)] = s4.z;
    jd
}

pub fn jacobians(pose: &Pose, geometry: &RobotGeometry) -> Result<Jacobians, KinematicsError> {
    let limbs = limb_frames(pose, geometry)?;
    Ok(Jacobians {
        forward: forward_rows(pose, &limbs),
        inverse: -Matrix4::identity(),
    })
}

/// Angle (degrees) between each external limb and the platform's Z_m axis.
pub fn socket_angles(pose: &Pose, geometry: &RobotGeometry) -> Result<[f64; 3], KinematicsError> {
    let limbs = limb_frames(pose, geometry)?;
    let zm = pose.psi_axis();
    Ok([0, 1, 2].map(|l| limbs[l].direction.dot(&zm).clamp(-1.0, 1.0).acos().to_degrees()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkOptions {
    pub max_iterations: usize,
    /// Convergence threshold on the largest closure residual (m^2).
    pub tolerance: f64,
    /// Step scaling applied while a step increases the residual.
    pub damping: f64,
    pub max_halvings: usize,
}

impl Default for FkOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            tolerance: 1e-12,
            damping: 0.5,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkSolution {
    pub pose: Pose,
    /// Number of residual evaluations, counting the converged one.
    pub iterations: usize,
    pub residual: f64,
}

pub fn forward_kinematics(
    joints: &JointVector,
    geometry: &RobotGeometry,
    initial: &Pose,
) -> Result<FkSolution, KinematicsError> {
    forward_kinematics_with(joints, geometry, initial, &FkOptions::default())
}

fn newton_step(pose: &Pose, res: &Vector4<f64>, geometry: &RobotGeometry) -> Result<Vector4<f64>, KinematicsError> {
    let limbs = limb_frames(pose, geometry)?;
    // d(residual_l)/dX = 2 * length_l * (J_D row l)
    let mut jac = forward_rows(pose, &limbs);
    for l in 0..4 {
        let scale = 2.0 * limbs[l].length;
        jac.row_mut(l).scale_mut(scale);
    }
    let step = jac.lu().solve(&(-res)).ok_or(KinematicsError::FkSingular)?;
    if !step.iter().all(|v| v.is_finite()) {
        return Err(KinematicsError::FkSingular);
    }
    Ok(step)
}

/// Damped Newton-Raphson on the four closure residuals.
pub fn forward_kinematics_with(
    joints: &JointVector,
    geometry: &RobotGeometry,
    initial: &Pose,
    opts: &FkOptions,
) -> Result<FkSolution, KinematicsError> {
    if !joints.is_finite() || !initial.is_finite() {
        return Err(KinematicsError::NonFinite);
    }
    let mut x = initial.to_vector();
    let mut pose = *initial;
    let mut res = closure_residuals(&pose, joints, geometry);
    for iteration in 1..=opts.max_iterations {
        let norm = res.amax();
        if !norm.is_finite() {
            break;
        }
        if norm < opts.tolerance {
            // One undamped polish step: near a fold the tolerance alone leaves
            // pose errors close to 1e-9.
            if iteration > 1 {
                if let Ok(step) = newton_step(&pose, &res, geometry) {
                    let polished = Pose::from_vector(&(x + step));
                    let r2 = closure_residuals(&polished, joints, geometry);
                    if r2.amax() < norm {
                        return Ok(FkSolution {
                            pose: polished,
                            iterations: iteration,
                            residual: r2.amax(),
                        });
                    }
                }
            }
            return Ok(FkSolution {
                pose,
                iterations: iteration,
                residual: norm,
            });
        }
        let step = newton_step(&pose, &res, geometry)?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial = Pose::from_vector(&(x + step * alpha));
            let trial_res = closure_residuals(&trial, joints, geometry);
            if trial_res.amax() < norm {
                x += step * alpha;
                pose = trial;
                res = trial_res;
                accepted = true;
                break;
            }
            alpha *= opts.damping;
        }
        if !accepted {
            return Err(KinematicsError::FkNoConvergence {
                iterations: iteration,
                residual: norm,
            });
        }
    }
    Err(KinematicsError::FkNoConvergence {
        iterations: opts.max_iterations,
        residual: res.amax(),
    })
}
