//! Robot geometry: anchor coordinates and feasibility limits.
//!
//! Anchor coordinates are the primary description. [`AnchorLayout`] is a
//! convenience that places anchors on circles from radii and angles:
//!
//! * limb 1 (`A`) sits on the D side (negative y) at angle `beta_fd` / `beta_md`;
//! * limb 2 (`B`) sits on the I side (positive y) at angle `beta_fi` / `beta_mi`;
//! * limb 3 (`C`) mirrors limb 2 across the X–Z plane;
//! * the central limb is fixed at `D0 = (0, d_s, 0)` and attaches at the mobile origin.
//!
//! Angles are measured from +X in degrees.

use crate::error::ConfigError;
use crate::kinematics;
use crate::types::Pose;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnchorLayout {
    /// Fixed-platform radii `R1, R2, R3` (m).
    pub fixed_radii: [f64; 3],
    pub beta_fd_deg: f64,
    pub beta_fi_deg: f64,
    /// Offset of the central limb's base along Y (m).
    pub d_s: f64,
    /// Mobile-platform radii `Rm1, Rm2, Rm3` (m).
    pub mobile_radii: [f64; 3],
    pub beta_md_deg: f64,
    pub beta_mi_deg: f64,
}

impl Default for AnchorLayout {
    fn default() -> Self {
        Self {
            fixed_radii: [0.3; 3],
            beta_fd_deg: 5.0,
            beta_fi_deg: 90.0,
            d_s: 0.0,
            mobile_radii: [0.2; 3],
            beta_md_deg: 70.0,
            beta_mi_deg: 30.0,
        }
    }
}

fn on_circle(radius: f64, angle_deg: f64, side: f64) -> Vector3<f64> {
    let a = angle_deg.to_radians();
    let (s, c) = crate::types::sin_cos(a);
    Vector3::new(radius * c, side * radius * s, 0.0)
}

/// Places the fixed anchors `[A0, B0, C0, D0]` and mobile anchors `[A1, B1, C1]`.
pub fn generate_anchors(
    layout: &AnchorLayout,
) -> Result<([Vector3<f64>; 4], [Vector3<f64>; 3]), ConfigError> {
    for (i, r) in layout.fixed_radii.iter().enumerate() {
        if !(*r > 0.0) {
            return Err(ConfigError::invalid(
                format!("layout.fixed_radii[{i}]"),
                format!("radius must be positive, got {r}"),
            ));
        }
    }
    for (i, r) in layout.mobile_radii.iter().enumerate() {
        if !(*r > 0.0) {
            return Err(ConfigError::invalid(
                format!("layout.mobile_radii[{i}]"),
                format!("radius must be positive, got {r}"),
            ));
        }
    }
    let [r1, r2, r3] = layout.fixed_radii;
    let [rm1, rm2, rm3] = layout.mobile_radii;
    let fixed = [
        on_circle(r1, layout.beta_fd_deg, -1.0),
        on_circle(r2, layout.beta_fi_deg, 1.0),
        on_circle(r3, layout.beta_fi_deg, -1.0),
        Vector3::new(0.0, layout.d_s, 0.0),
    ];
    let mobile = [
        on_circle(rm1, layout.beta_md_deg, -1.0),
        on_circle(rm2, layout.beta_mi_deg, 1.0),
        on_circle(rm3, layout.beta_mi_deg, -1.0),
    ];
    Ok((fixed, mobile))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotGeometry {
    /// `[A0, B0, C0, D0]` in the fixed frame (m).
    pub fixed_anchors: [Vector3<f64>; 4],
    /// `[A1, B1, C1]` in the mobile frame (m).
    pub mobile_anchors: [Vector3<f64>; 3],
    pub joint_min: [f64; 4],
    pub joint_max: [f64; 4],
    /// Spherical-socket angle limits of the external limbs (degrees).
    pub socket_limit_deg: [f64; 3],
    /// Pose whose forward-Jacobian determinant scales the near-singular tests.
    pub home: Pose,
}

pub const DEFAULT_JOINT_MIN: [f64; 4] = [0.65, 0.64, 0.65, 0.65];
pub const DEFAULT_JOINT_MAX: [f64; 4] = [0.93, 0.93, 0.93, 0.82];
pub const DEFAULT_SOCKET_LIMIT_DEG: [f64; 3] = [38.0; 3];
pub const DEFAULT_HOME: Pose = Pose::new(0.0, 0.75, 0.0, 0.0);

impl Default for RobotGeometry {
    fn default() -> Self {
        Self::from_layout(&AnchorLayout::default()).expect("default layout is valid")
    }
}

impl RobotGeometry {
    pub fn from_anchors(fixed_anchors: [Vector3<f64>; 4], mobile_anchors: [Vector3<f64>; 3]) -> Self {
        Self {
            fixed_anchors,
            mobile_anchors,
            joint_min: DEFAULT_JOINT_MIN,
            joint_max: DEFAULT_JOINT_MAX,
            socket_limit_deg: DEFAULT_SOCKET_LIMIT_DEG,
            home: DEFAULT_HOME,
        }
    }

    pub fn from_layout(layout: &AnchorLayout) -> Result<Self, ConfigError> {
        let (fixed, mobile) = generate_anchors(layout)?;
        Ok(Self::from_anchors(fixed, mobile))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let finite = self
            .fixed_anchors
            .iter()
            .chain(self.mobile_anchors.iter())
            .all(|a| a.iter().all(|v| v.is_finite()));
        if !finite {
            return Err(ConfigError::invalid("geometry", "anchor coordinates must be finite"));
        }
        for i in 0..4 {
            if !(self.joint_min[i] < self.joint_max[i]) {
                return Err(ConfigError::invalid(
                    format!("geometry.joint_min[{i}]"),
                    format!(
                        "joint_min ({}) must be below joint_max ({})",
                        self.joint_min[i], self.joint_max[i]
                    ),
                ));
            }
            if self.joint_min[i] < 0.0 {
                return Err(ConfigError::invalid(
                    format!("geometry.joint_min[{i}]"),
                    "actuator lengths cannot be negative",
                ));
            }
        }
        if self.socket_limit_deg.iter().any(|a| !(*a > 0.0 && *a <= 180.0)) {
            return Err(ConfigError::invalid(
                "geometry.socket_limit_deg",
                "limits must lie in (0, 180] degrees",
            ));
        }
        if self.fixed_anchors[3].y.abs() > 1e-12 {
            return Err(ConfigError::invalid(
                "geometry.fixed_anchors[3]",
                "the central limb base must lie in the X-Z plane (y = 0)",
            ));
        }
        for (name, set) in [
            ("fixed_anchors", &self.fixed_anchors[..3]),
            ("mobile_anchors", &self.mobile_anchors[..]),
        ] {
            for i in 0..3 {
                for j in (i + 1)..3 {
                    if (set[i] - set[j]).norm() < 1e-9 {
                        return Err(ConfigError::invalid(
                            format!("geometry.{name}"),
                            format!("anchors {i} and {j} coincide"),
                        ));
                    }
                }
            }
        }
        if !self.home.is_finite() {
            return Err(ConfigError::invalid("geometry.home", "home pose must be finite"));
        }
        let det = self.reference_det();
        if !(det.abs() > 1e-12) {
            return Err(ConfigError::invalid(
                "geometry.home",
                "home pose is singular or degenerate",
            ));
        }
        Ok(())
    }

    /// `det J_D` at the home pose; NaN if the home pose is degenerate.
    pub fn reference_det(&self) -> f64 {
        kinematics::jacobians(&self.home, self)
            .map(|j| j.forward.determinant())
            .unwrap_or(f64::NAN)
    }

    /// Joint-limit check with strict inequalities.
    pub fn joints_within_limits(&self, q: &crate::types::JointVector) -> bool {
        (0..4).all(|i| self.joint_min[i] < q[i] && q[i] < self.joint_max[i])
    }
}

/// Y-mirror-symmetric test layout: limb 1 on the +X axis (`A0 = (0.3, 0, 0)`,
/// `A1 = (0.2, 0, 0)`), lateral base anchors at ±95°, lateral mobile anchors
/// at ±70°, central base at the origin.
pub fn symmetric_geometry() -> RobotGeometry {
    let layout = AnchorLayout {
        beta_fd_deg: 0.0,
        beta_fi_deg: 95.0,
        beta_md_deg: 0.0,
        beta_mi_deg: 70.0,
        ..AnchorLayout::default()
    };
    RobotGeometry::from_layout(&layout).expect("symmetric layout is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_angle_places_anchor_on_x_axis() {
        let layout = AnchorLayout {
            beta_fd_deg: 0.0,
            ..AnchorLayout::default()
        };
        let (fixed, _) = generate_anchors(&layout).unwrap();
        assert!((fixed[0] - Vector3::new(0.3, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn central_base_at_origin_when_offset_is_zero() {
        let (fixed, _) = generate_anchors(&AnchorLayout::default()).unwrap();
        assert_eq!(fixed[3], Vector3::zeros());
    }

    #[test]
    fn lateral_pair_is_mirrored() {
        let (fixed, mobile) = generate_anchors(&AnchorLayout::default()).unwrap();
        assert_eq!(fixed[1].x, fixed[2].x);
        assert_eq!(fixed[1].y, -fixed[2].y);
        assert_eq!(mobile[1].x, mobile[2].x);
        assert_eq!(mobile[1].y, -mobile[2].y);
    }

    #[test]
    fn non_positive_radius_is_rejected() {
        let layout = AnchorLayout {
            fixed_radii: [0.3, 0.0, 0.3],
            ..AnchorLayout::default()
        };
        assert!(generate_anchors(&layout).is_err());
        let layout = AnchorLayout {
            mobile_radii: [0.2, 0.2, -0.1],
            ..AnchorLayout::default()
        };
        assert!(generate_anchors(&layout).is_err());
    }

    #[test]
    fn default_geometry_validates() {
        RobotGeometry::default().validate().unwrap();
    }

    #[test]
    fn inverted_limits_are_rejected() {
        let mut g = RobotGeometry::default();
        g.joint_min[2] = 0.95;
        assert!(matches!(g.validate(), Err(ConfigError::Invalid { .. })));
    }

    #[test]
    fn coincident_anchors_are_rejected() {
        let mut g = RobotGeometry::default();
        g.mobile_anchors[2] = g.mobile_anchors[1];
        assert!(g.validate().is_err());
    }
}
