//! Per-axis mass-spring-damper admittance filter, `m dd + c d + k d = e_F`.
//!
//! Each axis is discretized exactly under a zero-order hold on the input, so a
//! piecewise-constant force error produces samples of the continuous solution.

use crate::error::ControlError;
use crate::types::{ForceVector, Pose};
use nalgebra::{Matrix2, Matrix3, Vector2, Vector4};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmittanceParams {
    /// Stiffness per axis (N/m for x, z; N·m/rad for theta, psi).
    pub k: [f64; 4],
    pub c: [f64; 4],
    pub m: [f64; 4],
}

impl Default for AdmittanceParams {
    fn default() -> Self {
        Self {
            k: [250.0, 500.0, 25.0, 25.0],
            c: [894.0, 894.0, 89.4, 89.4],
            m: [200.0, 200.0, 20.0, 20.0],
        }
    }
}

impl AdmittanceParams {
    pub fn is_valid(&self) -> bool {
        (0..4).all(|i| self.k[i] > 0.0 && self.c[i] > 0.0 && self.m[i] > 0.0)
            && self.k.iter().chain(&self.c).chain(&self.m).all(|v| v.is_finite())
    }

    /// Continuous-time poles of one axis; real when the axis is overdamped.
    pub fn poles(&self, axis: usize) -> (f64, f64) {
        let (k, c, m) = (self.k[axis], self.c[axis], self.m[axis]);
        let disc = (c * c - 4.0 * k * m).max(0.0).sqrt();
        ((-c + disc) / (2.0 * m), (-c - disc) / (2.0 * m))
    }

    pub fn is_overdamped(&self, axis: usize) -> bool {
        self.c[axis] * self.c[axis] > 4.0 * self.k[axis] * self.m[axis]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AdmittanceState {
    /// Pose offset `(m, m, rad, rad)`.
    pub dx: [f64; 4],
    pub dx_rate: [f64; 4],
}

impl AdmittanceState {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    pub fn offset(&self) -> Vector4<f64> {
        Vector4::from(self.dx)
    }
}

/// Discrete transition for one axis: `s' = a s + b u`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct AxisMap {
    a: Matrix2<f64>,
    b: Vector2<f64>,
}

fn discretize_axis(k: f64, c: f64, m: f64, dt: f64) -> AxisMap {
    // exp([[A, B], [0, 0]] dt) = [[Ad, Bd], [0, 1]]
    let aug = Matrix3::new(
        0.0, 1.0, 0.0, //
        -k / m, -c / m, 1.0 / m, //
        0.0, 0.0, 0.0,
    ) * dt;
    let e = aug.exp();
    AxisMap {
        a: Matrix2::new(e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)]),
        b: Vector2::new(e[(0, 2)], e[(1, 2)]),
    }
}

/// Admittance filter with its discretization cached for one step size.
#[derive(Debug, Clone, PartialEq)]
pub struct Admittance {
    params: AdmittanceParams,
    dt: f64,
    axes: [AxisMap; 4],
    pub state: AdmittanceState,
}

impl Admittance {
    pub fn new(params: AdmittanceParams, dt: f64) -> Result<Self, ControlError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(ControlError::NonPositiveStep(dt));
        }
        let axes = [0, 1, 2, 3].map(|i| discretize_axis(params.k[i], params.c[i], params.m[i], dt));
        Ok(Self {
            params,
            dt,
            axes,
            state: AdmittanceState::default(),
        })
    }

    pub fn params(&self) -> &AdmittanceParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances one step with the (already gated) force error held constant.
    pub fn step(&mut self, gated_error: &ForceVector) -> &AdmittanceState {
        let e = gated_error.to_array();
        for (i, axis) in self.axes.iter().enumerate() {
            let s = Vector2::new(self.state.dx[i], self.state.dx_rate[i]);
            let next = axis.a * s + axis.b * e[i];
            self.state.dx[i] = next[0];
            self.state.dx_rate[i] = next[1];
        }
        &self.state
    }

    /// Steps by an arbitrary `dt`, recomputing the discretization.
    pub fn step_with_dt(&mut self, gated_error: &ForceVector, dt: f64) -> Result<&AdmittanceState, ControlError> {
        if dt != self.dt {
            let state = self.state;
            *self = Self::new(self.params, dt)?;
            self.state = state;
        }
        Ok(self.step(gated_error))
    }

    pub fn reset(&mut self) {
        self.state.reset();
    }
}

/// `X_a = X_r + dX`, componentwise.
pub fn compose_reference(reference: &Pose, offset: &[f64; 4]) -> Pose {
    Pose::new(
        reference.x + offset[0],
        reference.z + offset[1],
        reference.theta + offset[2],
        reference.psi + offset[3],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_input_stays_at_rest() {
        let mut a = Admittance::new(AdmittanceParams::default(), 0.01).unwrap();
        for _ in 0..100 {
            a.step(&ForceVector::ZERO);
        }
        assert_eq!(a.state, AdmittanceState::default());
    }

    #[test]
    fn non_positive_dt_is_rejected() {
        assert_eq!(
            Admittance::new(AdmittanceParams::default(), 0.0).unwrap_err(),
            ControlError::NonPositiveStep(0.0)
        );
        assert!(Admittance::new(AdmittanceParams::default(), -0.01).is_err());
    }

    #[test]
    fn default_axes_are_overdamped() {
        let p = AdmittanceParams::default();
        for i in 0..4 {
            assert!(p.is_overdamped(i));
        }
        let (s1, s2) = p.poles(0);
        assert_abs_diff_eq!(s1, (-894.0 + 599_236f64.sqrt()) / 400.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s2, (-894.0 - 599_236f64.sqrt()) / 400.0, epsilon = 1e-14);
    }

    #[test]
    fn compose_is_componentwise() {
        let xr = Pose::new(0.0, 0.7, 0.0, 0.0);
        assert_eq!(compose_reference(&xr, &[0.0; 4]), xr);
        assert_eq!(
            compose_reference(&xr, &[0.01, 0.0, 0.0, 0.1]),
            Pose::new(0.01, 0.7, 0.0, 0.1)
        );
    }

    #[test]
    fn step_with_same_dt_matches_step() {
        let f = ForceVector::new(10.0, 0.0, 1.0, 0.0);
        let mut a = Admittance::new(AdmittanceParams::default(), 0.01).unwrap();
        let mut b = a.clone();
        a.step(&f);
        b.step_with_dt(&f, 0.01).unwrap();
        assert_eq!(a.state, b.state);
    }
}
