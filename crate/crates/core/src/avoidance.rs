//! Real-time Type II singularity avoidance.
//!
//! The commanded actuator lengths are `IK(X_a) + v_d * t_s * dt`, where `dt` is
//! an integer deviation counter. When the measured pose comes within `omega_lim`
//! of a singularity, the pair of actuators with the smallest Ω is nudged by one
//! step in whichever of eight directions most increases that pair's Ω. Once the
//! admittance reference is clear again, the counter is walked back to zero.

use crate::error::KinematicsError;
use crate::geometry::RobotGeometry;
use crate::kinematics::{forward_kinematics, joint_lengths, socket_angles};
use crate::screw::{omega_indices_with_reference, pair_omega, OmegaVector, PAIRS};
use crate::types::{JointVector, Pose};
use serde::{Deserialize, Serialize};

/// The eight unit modifications of an actuator pair.
pub const MODIFICATIONS: [[i64; 2]; 8] = [
    [1, 1],
    [-1, -1],
    [1, -1],
    [-1, 1],
    [1, 0],
    [-1, 0],
    [0, 1],
    [0, -1],
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceParams {
    /// Deviation speed per actuator (m/s).
    pub v_d: f64,
    /// Control period (s).
    pub t_s: f64,
    /// Ω threshold (degrees).
    pub omega_lim: f64,
}

impl Default for AvoidanceParams {
    fn default() -> Self {
        Self {
            v_d: 0.01,
            t_s: 0.01,
            omega_lim: 2.0,
        }
    }
}

impl AvoidanceParams {
    /// Length change of one deviation step (m).
    pub fn step_length(&self) -> f64 {
        self.v_d * self.t_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[default]
    Idle,
    Avoiding,
    Returning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AvoidanceState {
    pub dt: [i64; 4],
    pub ext_pin: u8,
    /// One-based pair modified on the most recent avoidance tick.
    pub last_pair: Option<(usize, usize)>,
    pub phase: Phase,
}

impl Default for AvoidanceState {
    fn default() -> Self {
        Self {
            dt: [0; 4],
            ext_pin: 1,
            last_pair: None,
            phase: Phase::Idle,
        }
    }
}

impl AvoidanceState {
    pub fn is_zero(&self) -> bool {
        self.dt.iter().all(|d| *d == 0)
    }
}

/// What the step did to the deviation counter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Avoid,
    Return,
    /// Candidates were scored but none was feasible.
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    /// Zero-based index into [`PAIRS`].
    pub pair_index: usize,
    /// Index into [`MODIFICATIONS`]; `None` on hold.
    pub column: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub q_d: JointVector,
    /// `IK(X_a)`
    pub q_a: JointVector,
    pub ext_pin: u8,
    pub omega_a: OmegaVector,
    pub omega_c: OmegaVector,
    pub action: Option<Action>,
}

/// Pair Ω after shifting the pair by each candidate column, or 0 where the
/// candidate leaves the joint box, fails FK, or breaks a socket limit.
pub fn feasibility(
    x_c: &Pose,
    q_base: &JointVector,
    columns: &[[i64; 2]],
    pair_index: usize,
    params: &AvoidanceParams,
    geometry: &RobotGeometry,
) -> Vec<f64> {
    let (i, j) = PAIRS[pair_index];
    columns
        .iter()
        .map(|col| {
            let mut q = *q_base;
            q[i] += params.step_length() * col[0] as f64;
            q[j] += params.step_length() * col[1] as f64;
            candidate_score(x_c, &q, pair_index, geometry).unwrap_or(0.0)
        })
        .collect()
}

fn candidate_score(x_c: &Pose, q: &JointVector, pair_index: usize, geometry: &RobotGeometry) -> Option<f64> {
    if !geometry.joints_within_limits(q) {
        return None;
    }
    let pose = forward_kinematics(q, geometry, x_c).ok()?.pose;
    let alpha = socket_angles(&pose, geometry).ok()?;
    if (0..3).any(|l| !(alpha[l] < geometry.socket_limit_deg[l])) {
        return None;
    }
    pair_omega(&pose, geometry, pair_index).ok()
}

/// First index of the largest positive score.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, s) in scores.iter().enumerate() {
        if *s > 0.0 && best.is_none_or(|b| *s > scores[b]) {
            best = Some(k);
        }
    }
    best
}

fn pair_sum(dt: &[i64; 4], pair_index: usize) -> i64 {
    let (i, j) = PAIRS[pair_index];
    dt[i].abs() + dt[j].abs()
}

/// Pair with the largest `|dt_i| + |dt_j|`, lowest index on ties.
pub fn return_pair(dt: &[i64; 4]) -> usize {
    let mut best = 0;
    for p in 1..PAIRS.len() {
        if pair_sum(dt, p) > pair_sum(dt, best) {
            best = p;
        }
    }
    best
}

/// Columns that strictly reduce the pair's `|dt_i| + |dt_j|`.
pub fn return_columns(dt: &[i64; 4], pair_index: usize) -> Vec<(usize, [i64; 2])> {
    let (i, j) = PAIRS[pair_index];
    let before = pair_sum(dt, pair_index);
    MODIFICATIONS
        .iter()
        .enumerate()
        .filter(|(_, col)| (dt[i] + col[0]).abs() + (dt[j] + col[1]).abs() < before)
        .map(|(k, col)| (k, *col))
        .collect()
}

pub fn deviation_command(q_a: &JointVector, dt: &[i64; 4], params: &AvoidanceParams) -> JointVector {
    let mut q = *q_a;
    for i in 0..4 {
        q[i] += params.step_length() * dt[i] as f64;
    }
    q
}

#[derive(Debug, Clone, PartialEq)]
pub struct Avoidance {
    pub params: AvoidanceParams,
    pub state: AvoidanceState,
    reference_det: f64,
}

impl Avoidance {
    pub fn new(params: AvoidanceParams, geometry: &RobotGeometry) -> Self {
        Self {
            params,
            state: AvoidanceState::default(),
            reference_det: geometry.reference_det(),
        }
    }

    pub fn reset(&mut self) {
        self.state = AvoidanceState::default();
    }

    pub fn reference_det(&self) -> f64 {
        self.reference_det
    }

    /// One tick of the avoidance state machine.
    pub fn step(&mut self, x_a: &Pose, x_c: &Pose, geometry: &RobotGeometry) -> Result<StepOutput, KinematicsError> {
        let p = self.params;
        let q_a = joint_lengths(x_a, geometry)?;
        let q_base = deviation_command(&q_a, &self.state.dt, &p);
        let omega_a = omega_indices_with_reference(x_a, geometry, self.reference_det)?;
        let omega_c = omega_indices_with_reference(x_c, geometry, self.reference_det)?;

        let mut action = None;
        if omega_c.min < p.omega_lim {
            let pair_index = omega_c.min_index;
            let scores = feasibility(x_c, &q_base, &MODIFICATIONS, pair_index, &p, geometry);
            let column = argmax(&scores);
            if let Some(k) = column {
                self.apply(pair_index, MODIFICATIONS[k]);
            }
            let (i, j) = PAIRS[pair_index];
            self.state.last_pair = Some((i + 1, j + 1));
            self.state.phase = Phase::Avoiding;
            action = Some(Action {
                kind: if column.is_some() { ActionKind::Avoid } else { ActionKind::Hold },
                pair_index,
                column,
            });
        } else if omega_a.min > p.omega_lim && !self.state.is_zero() {
            let pair_index = return_pair(&self.state.dt);
            let candidates = return_columns(&self.state.dt, pair_index);
            let cols: Vec<[i64; 2]> = candidates.iter().map(|(_, c)| *c).collect();
            let scores = feasibility(x_c, &q_base, &cols, pair_index, &p, geometry);
            let column = argmax(&scores).map(|k| candidates[k].0);
            if let Some(k) = column {
                self.apply(pair_index, MODIFICATIONS[k]);
            }
            self.state.phase = Phase::Returning;
            action = Some(Action {
                kind: if column.is_some() { ActionKind::Return } else { ActionKind::Hold },
                pair_index,
                column,
            });
        } else if !self.state.is_zero() {
            self.state.phase = Phase::Returning;
        }
        if self.state.is_zero() && omega_c.min >= p.omega_lim {
            self.state.phase = Phase::Idle;
        }

        let ext_pin = u8::from(omega_a.min > p.omega_lim);
        self.state.ext_pin = ext_pin;
        Ok(StepOutput {
            q_d: deviation_command(&q_a, &self.state.dt, &p),
            q_a,
            ext_pin,
            omega_a,
            omega_c,
            action,
        })
    }

    fn apply(&mut self, pair_index: usize, col: [i64; 2]) {
        let (i, j) = PAIRS[pair_index];
        self.state.dt[i] += col[0];
        self.state.dt[j] += col[1];
    }
}
