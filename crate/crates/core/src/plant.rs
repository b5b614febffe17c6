//! Simulated robot: velocity-limited first-order actuator servos, the true
//! platform pose, and loss of control past a Type II singularity.
//!
//! This is a surrogate for the real inner loop, not a dynamic model. Each
//! actuator follows `qdot = clamp((cmd - q) / tau, -v_max, v_max)`, integrated
//! exactly. The true pose is recovered from the true lengths by forward
//! kinematics. Once the pose crosses the breach threshold the platform is no
//! longer driven by the actuators: it drifts along the null direction of the
//! forward Jacobian, downwards, and the actuators are dragged along.

use crate::error::{KinematicsError, SimulationError};
use crate::geometry::RobotGeometry;
use crate::kinematics::{forward_kinematics, jacobians, joint_lengths};
use crate::screw::omega_indices_with_reference;
use crate::types::{JointVector, Pose};
use nalgebra::Vector4;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServoParams {
    pub kp: [f64; 4],
    pub kd: [f64; 4],
    /// Lag time constant (s).
    pub tau: [f64; 4],
    /// m/s
    pub v_max: [f64; 4],
    /// Saturation of the reported control action.
    pub u_max: [f64; 4],
}

impl Default for ServoParams {
    fn default() -> Self {
        Self {
            kp: [20_000.0; 4],
            kd: [400.0; 4],
            tau: [0.02; 4],
            v_max: [0.05; 4],
            u_max: [500.0; 4],
        }
    }
}

impl ServoParams {
    pub fn is_valid(&self) -> bool {
        let all = self.kp.iter().chain(&self.kd).chain(&self.tau).chain(&self.v_max).chain(&self.u_max);
        all.clone().all(|v| v.is_finite()) && all.clone().all(|v| *v > 0.0)
    }
}

/// Exact solution of the velocity-limited lag over `h` seconds with a fixed
/// command. Returns `(q, qdot)` at the end of the interval.
pub fn servo_advance(q: f64, cmd: f64, tau: f64, v_max: f64, h: f64) -> (f64, f64) {
    let err = cmd - q;
    let sign = err.signum();
    let knee = v_max * tau;
    let mut remaining = h;
    let mut e = err.abs();
    if e > knee {
        let t_sat = (e - knee) / v_max;
        if remaining <= t_sat {
            let q_end = q + sign * v_max * remaining;
            return (q_end, sign * v_max);
        }
        remaining -= t_sat;
        e = knee;
    }
    let e_end = e * (-remaining / tau).exp();
    (cmd - sign * e_end, sign * e_end / tau)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantParams {
    pub servo: ServoParams,
    /// Integration step beneath the control tick (s).
    pub substep: f64,
    /// Ω below which control is lost (degrees).
    pub breach_threshold: f64,
    /// Drift speed after a breach (task-space units per second).
    pub drift_speed: f64,
    /// If forward kinematics fails while the previous pose was within this Ω
    /// margin (degrees), the pose has folded through the singularity and the
    /// failure counts as a breach rather than a fault.
    pub fold_margin: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            servo: ServoParams::default(),
            substep: 0.001,
            breach_threshold: 0.5,
            drift_speed: 0.05,
            fold_margin: 5.0,
        }
    }
}

/// Timestamped true poses, used by the pose sensor to look back in time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PoseHistory {
    samples: VecDeque<(f64, Pose)>,
    horizon: f64,
}

impl PoseHistory {
    pub fn new(horizon: f64) -> Self {
        Self {
            samples: VecDeque::new(),
            horizon,
        }
    }

    pub fn push(&mut self, t: f64, pose: Pose) {
        self.samples.push_back((t, pose));
        while self.samples.len() > 2 && t - self.samples[1].0 > self.horizon {
            self.samples.pop_front();
        }
    }

    pub fn clear(&mut self) {
        self.samples.clear();
    }

    pub fn latest(&self) -> Option<(f64, Pose)> {
        self.samples.back().copied()
    }

    /// Linear interpolation of the true pose at `t`, clamped to the stored range.
    pub fn at(&self, t: f64) -> Option<Pose> {
        let first = *self.samples.front()?;
        if t <= first.0 {
            return Some(first.1);
        }
        let last = *self.samples.back()?;
        if t >= last.0 {
            return Some(last.1);
        }
        let idx = self.samples.partition_point(|(ts, _)| *ts <= t);
        let (t0, p0) = self.samples[idx - 1];
        let (t1, p1) = self.samples[idx];
        if t1 <= t0 {
            return Some(p1);
        }
        let w = (t - t0) / (t1 - t0);
        Some(Pose::from_vector(&(p0.to_vector() * (1.0 - w) + p1.to_vector() * w)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub time: f64,
    pub q: JointVector,
    pub q_rate: [f64; 4],
    pub pose: Pose,
    pub breached: bool,
    /// Unit task-space drift direction after a breach.
    pub drift: Option<Vector4<f64>>,
    /// Ω minimum of the true pose after the last substep.
    pub min_omega: f64,
    last_command: Option<JointVector>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantStep {
    /// Control actions computed at the start of the tick.
    pub u: [f64; 4],
    /// Set on the tick the breach first latched.
    pub breach_started: bool,
}

#[derive(Debug, Clone)]
pub struct Plant {
    pub params: PlantParams,
    geometry: RobotGeometry,
    reference_det: f64,
    pub state: PlantState,
    pub history: PoseHistory,
}

impl Plant {
    pub fn new(params: PlantParams, geometry: RobotGeometry, start: Pose) -> Result<Self, KinematicsError> {
        let reference_det = geometry.reference_det();
        let q = joint_lengths(&start, &geometry)?;
        let min_omega = omega_indices_with_reference(&start, &geometry, reference_det)?.min;
        let mut history = PoseHistory::new(1.0);
        history.push(0.0, start);
        Ok(Self {
            params,
            geometry,
            reference_det,
            state: PlantState {
                time: 0.0,
                q,
                q_rate: [0.0; 4],
                pose: start,
                breached: false,
                drift: None,
                min_omega,
                last_command: None,
            },
            history,
        })
    }

    pub fn geometry(&self) -> &RobotGeometry {
        &self.geometry
    }

    /// Control action for `cmd` given the current state.
    pub fn control_action(&self, cmd: &JointVector, dt: f64) -> [f64; 4] {
        let s = &self.params.servo;
        let prev = self.state.last_command.unwrap_or(*cmd);
        std::array::from_fn(|i| {
            let cmd_rate = (cmd[i] - prev[i]) / dt;
            let u = s.kp[i] * (cmd[i] - self.state.q[i]) + s.kd[i] * (cmd_rate - self.state.q_rate[i]);
            u.clamp(-s.u_max[i], s.u_max[i])
        })
    }

    /// Advances the plant by one control period `dt` toward `cmd`.
    pub fn step(&mut self, cmd: &JointVector, dt: f64) -> Result<PlantStep, SimulationError> {
        if !(dt > 0.0) {
            return Err(SimulationError::Control(crate::error::ControlError::NonPositiveStep(dt)));
        }
        let u = self.control_action(cmd, dt);
        self.state.last_command = Some(*cmd);
        let n = ((dt / self.params.substep).round() as usize).max(1);
        let h = dt / n as f64;
        let t0 = self.state.time;
        let was_breached = self.state.breached;
        for k in 1..=n {
            self.substep(cmd, h)?;
            self.state.time = t0 + h * k as f64;
            self.history.push(self.state.time, self.state.pose);
        }
        Ok(PlantStep {
            u,
            breach_started: !was_breached && self.state.breached,
        })
    }

    fn fault(&self, reason: String) -> SimulationError {
        SimulationError::Fault {
            time: self.state.time,
            reason,
        }
    }

    fn substep(&mut self, cmd: &JointVector, h: f64) -> Result<(), SimulationError> {
        if self.state.breached {
            return self.drift(h);
        }
        let s = self.params.servo;
        let mut q = self.state.q;
        for i in 0..4 {
            let (qi, ri) = servo_advance(q[i], cmd[i], s.tau[i], s.v_max[i], h);
            q[i] = qi;
            self.state.q_rate[i] = ri;
        }
        self.state.q = q;
        match forward_kinematics(&q, &self.geometry, &self.state.pose) {
            Ok(sol) => {
                self.state.pose = sol.pose;
                let omega = omega_indices_with_reference(&sol.pose, &self.geometry, self.reference_det)
                    .map_err(|e| self.fault(format!("true pose: {e}")))?;
                self.state.min_omega = omega.min;
                if omega.min < self.params.breach_threshold {
                    self.state.breached = true;
                }
                Ok(())
            }
            Err(e) if self.state.min_omega < self.params.fold_margin => {
                log::debug!("forward kinematics lost near singularity ({e}); latching breach");
                self.state.breached = true;
                self.drift(h)
            }
            Err(e) => Err(self.fault(format!("forward kinematics of true joints failed: {e}"))),
        }
    }

    fn drift(&mut self, h: f64) -> Result<(), SimulationError> {
        let dir = null_direction(&self.state.pose, &self.geometry, self.state.drift.as_ref())
            .map_err(|e| self.fault(format!("drift direction: {e}")))?;
        self.state.drift = Some(dir);
        let pose = Pose::from_vector(&(self.state.pose.to_vector() + dir * (self.params.drift_speed * h)));
        let q = joint_lengths(&pose, &self.geometry).map_err(|e| self.fault(format!("drifted pose: {e}")))?;
        for i in 0..4 {
            self.state.q_rate[i] = (q[i] - self.state.q[i]) / h;
        }
        self.state.q = q;
        self.state.pose = pose;
        self.state.min_omega = omega_indices_with_reference(&pose, &self.geometry, self.reference_det)
            .map(|o| o.min)
            .unwrap_or(0.0);
        Ok(())
    }
}

/// Unit right-singular vector of `J_D` for its smallest singular value, signed
/// so that `zdot <= 0`. When the z component vanishes the sign follows `previous`.
pub fn null_direction(
    pose: &Pose,
    geometry: &RobotGeometry,
    previous: Option<&Vector4<f64>>,
) -> Result<Vector4<f64>, KinematicsError> {
    let jd = jacobians(pose, geometry)?.forward;
    let svd = jd.svd(false, true);
    let v_t = svd.v_t.expect("v_t requested");
    let k = svd.singular_values.imin();
    let mut d: Vector4<f64> = v_t.row(k).transpose();
    d /= d.norm();
    if d[1].abs() > 1e-12 {
        if d[1] > 0.0 {
            d = -d;
        }
    } else if let Some(p) = previous {
        if d.dot(p) < 0.0 {
            d = -d;
        }
    }
    Ok(d)
}
