//! Fixed-step scenario executor.
//!
//! One tick, in order: sense force and pose, form `e_F = F_r - F_c`, gate it by
//! the previous `ext_pin` (complemented mode), step the admittance filter,
//! compose `X_a = X_r + dX`, compute the joint command (avoidance in
//! complemented mode, plain inverse kinematics otherwise), then advance the
//! plant by one control period. Measurements in a record are the ones the
//! controller saw at the start of the tick.

use crate::admittance::{compose_reference, Admittance};
use crate::avoidance::{Action, Avoidance};
use crate::config::{ControllerMode, ScenarioConfig};
use crate::error::SimulationError;
use crate::geometry::RobotGeometry;
use crate::kinematics::joint_lengths;
use crate::metrics::{compute_report, MetricsReport};
use crate::plant::Plant;
use crate::screw::{omega_indices_with_reference, OmegaVector};
use crate::sensors::{ForceScript, ForceSensor, PoseSensor};
use crate::types::{ForceVector, JointVector, Pose};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    /// An avoidance episode begins: `ext_pin` dropped or the deviation became non-zero.
    AvoidanceEnter,
    /// The episode ends: `ext_pin = 1` and the deviation is back to zero.
    AvoidanceExit,
    /// The deviation counter returned to zero.
    ReturnComplete,
    Breach,
    Fault,
}

impl Event {
    pub fn as_str(&self) -> &'static str {
        match self {
            Event::AvoidanceEnter => "avoidance_enter",
            Event::AvoidanceExit => "avoidance_exit",
            Event::ReturnComplete => "return_complete",
            Event::Breach => "breach",
            Event::Fault => "fault",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Event::AvoidanceEnter,
            Event::AvoidanceExit,
            Event::ReturnComplete,
            Event::Breach,
            Event::Fault,
        ]
        .into_iter()
        .find(|e| e.as_str() == s)
    }
}

/// Snapshot of one control tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub tick: u64,
    pub t: f64,
    pub f_c: ForceVector,
    /// Ungated force error `F_r - F_c`.
    pub e_f: ForceVector,
    pub dx: [f64; 4],
    pub x_r: Pose,
    pub x_a: Pose,
    pub x_c: Pose,
    pub x_true: Pose,
    /// `IK(X_a)`
    pub q_a: JointVector,
    /// Command sent to the servos.
    pub q_d: JointVector,
    /// Measured actuator lengths.
    pub q_c: JointVector,
    pub min_omega_a: f64,
    pub pair_a: [usize; 2],
    pub min_omega_c: f64,
    pub pair_c: [usize; 2],
    /// Ω minimum of the true pose at the start of the tick.
    pub min_omega_true: f64,
    pub dt: [i64; 4],
    pub ext_pin: u8,
    pub u: [f64; 4],
    pub breached: bool,
    pub events: Vec<Event>,
}

impl LogRecord {
    pub fn has(&self, e: Event) -> bool {
        self.events.contains(&e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub records: Vec<LogRecord>,
    pub metrics: MetricsReport,
    /// Diagnostic of the fault that halted the run, if any.
    pub fault: Option<String>,
}

/// Controller, plant and sensors for one scenario, advanced one tick at a time.
#[derive(Debug, Clone)]
pub struct Session {
    config: ScenarioConfig,
    geometry: RobotGeometry,
    admittance: Admittance,
    avoidance: Avoidance,
    plant: Plant,
    pose_sensor: PoseSensor,
    force_sensor: ForceSensor,
    script: Option<ForceScript>,
    /// Externally applied force; replaces the script once set.
    force_override: Option<ForceVector>,
    tick: u64,
    ext_pin: u8,
    episode_active: bool,
    last_q_d: Option<JointVector>,
    fault: Option<String>,
}

impl Session {
    pub fn new(config: ScenarioConfig) -> Result<Self, SimulationError> {
        let geometry = config.validate()?;
        let admittance = Admittance::new(config.admittance, config.control_period)?;
        let avoidance = Avoidance::new(config.avoidance_params(), &geometry);
        let plant = Plant::new(config.plant, geometry.clone(), config.start()).map_err(|e| SimulationError::Fault {
            time: 0.0,
            reason: format!("start pose: {e}"),
        })?;
        Ok(Self {
            pose_sensor: PoseSensor::new(config.pose_sensor, config.seed),
            force_sensor: ForceSensor::new(config.force_sensor, config.seed),
            script: config.force_script(),
            force_override: None,
            tick: 0,
            ext_pin: 1,
            episode_active: false,
            last_q_d: None,
            fault: None,
            config,
            geometry,
            admittance,
            avoidance,
            plant,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn geometry(&self) -> &RobotGeometry {
        &self.geometry
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn avoidance(&self) -> &Avoidance {
        &self.avoidance
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.config.control_period
    }

    pub fn fault(&self) -> Option<&str> {
        self.fault.as_deref()
    }

    pub fn is_finished(&self) -> bool {
        self.fault.is_some() || self.tick >= self.config.tick_count()
    }

    /// Sets the patient force, clamped to the sensor range. Returns the applied value.
    pub fn set_force(&mut self, f: ForceVector) -> ForceVector {
        let f = self.config.force_sensor.clamp(&f);
        self.force_override = Some(f);
        f
    }

    /// Restarts the scenario from its initial state.
    pub fn reset(&mut self) -> Result<(), SimulationError> {
        *self = Session::new(self.config.clone())?;
        Ok(())
    }

    pub fn source_force(&self, t: f64) -> ForceVector {
        match (self.force_override, &self.script) {
            (Some(f), _) => f,
            (None, Some(s)) => s.value(t),
            (None, None) => ForceVector::ZERO,
        }
    }

    fn omega(&self, pose: &Pose) -> Result<OmegaVector, SimulationError> {
        omega_indices_with_reference(pose, &self.geometry, self.avoidance.reference_det()).map_err(|e| {
            SimulationError::Fault {
                time: self.time(),
                reason: e.to_string(),
            }
        })
    }

    /// Runs one control tick and returns its record. After a fault the record
    /// carries [`Event::Fault`] and the session refuses further ticks.
    pub fn step(&mut self) -> Result<LogRecord, SimulationError> {
        if let Some(reason) = &self.fault {
            return Err(SimulationError::Fault {
                time: self.time(),
                reason: reason.clone(),
            });
        }
        let t = self.time();
        let t_s = self.config.control_period;
        let f_c = self.force_sensor.sense(&self.source_force(t));
        let x_c = self.pose_sensor.sense(&self.plant.history, t);
        let q_c = self.plant.state.q;
        let x_true = self.plant.state.pose;
        let min_omega_true = self.plant.state.min_omega;
        let e_f = self.config.force_reference - f_c;
        let gated = match self.config.mode {
            ControllerMode::Complemented => e_f.scale(self.ext_pin as f64),
            ControllerMode::Conventional => e_f,
        };
        let dx = self.admittance.step(&gated).dx;
        let x_r = self.config.reference.at(t);
        let x_a = compose_reference(&x_r, &dx);

        let mut record = LogRecord {
            tick: self.tick,
            t,
            f_c,
            e_f,
            dx,
            x_r,
            x_a,
            x_c,
            x_true,
            q_a: self.last_q_d.unwrap_or(q_c),
            q_d: self.last_q_d.unwrap_or(q_c),
            q_c,
            min_omega_a: min_omega_true,
            pair_a: [0, 0],
            min_omega_c: min_omega_true,
            pair_c: [0, 0],
            min_omega_true,
            dt: self.avoidance.state.dt,
            ext_pin: self.ext_pin,
            u: [0.0; 4],
            breached: self.plant.state.breached,
            events: Vec::new(),
        };

        match self.control(&x_a, &x_c, &mut record) {
            Ok(()) => {}
            Err(e) => return Ok(self.halt(record, e)),
        }

        let active = record.ext_pin == 0 || record.dt.iter().any(|d| *d != 0);
        if active && !self.episode_active {
            record.events.push(Event::AvoidanceEnter);
        }
        if !active && self.episode_active {
            record.events.push(Event::AvoidanceExit);
        }
        self.episode_active = active;

        match self.plant.step(&record.q_d, t_s) {
            Ok(out) => {
                record.u = out.u;
                if out.breach_started {
                    record.events.push(Event::Breach);
                }
            }
            Err(e) => return Ok(self.halt(record, e)),
        }
        self.last_q_d = Some(record.q_d);
        self.tick += 1;
        Ok(record)
    }

    fn control(&mut self, x_a: &Pose, x_c: &Pose, record: &mut LogRecord) -> Result<(), SimulationError> {
        match self.config.mode {
            ControllerMode::Complemented => {
                let dt_before = self.avoidance.state.dt;
                let out = self.avoidance.step(x_a, x_c, &self.geometry).map_err(|e| SimulationError::Fault {
                    time: self.time(),
                    reason: e.to_string(),
                })?;
                record.q_a = out.q_a;
                record.q_d = out.q_d;
                record.min_omega_a = out.omega_a.min;
                record.pair_a = [out.omega_a.pair.0, out.omega_a.pair.1];
                record.min_omega_c = out.omega_c.min;
                record.pair_c = [out.omega_c.pair.0, out.omega_c.pair.1];
                record.dt = self.avoidance.state.dt;
                record.ext_pin = out.ext_pin;
                if record.dt.iter().all(|d| *d == 0) && dt_before.iter().any(|d| *d != 0) {
                    record.events.push(Event::ReturnComplete);
                }
                log_action(self.tick, out.action);
                self.ext_pin = out.ext_pin;
            }
            ControllerMode::Conventional => {
                let q = joint_lengths(x_a, &self.geometry).map_err(|e| SimulationError::Fault {
                    time: self.time(),
                    reason: format!("inverse kinematics of X_a: {e}"),
                })?;
                let oa = self.omega(x_a)?;
                let oc = self.omega(x_c)?;
                record.q_a = q;
                record.q_d = q;
                record.min_omega_a = oa.min;
                record.pair_a = [oa.pair.0, oa.pair.1];
                record.min_omega_c = oc.min;
                record.pair_c = [oc.pair.0, oc.pair.1];
                record.dt = [0; 4];
                record.ext_pin = 1;
            }
        }
        Ok(())
    }

    fn halt(&mut self, mut record: LogRecord, err: SimulationError) -> LogRecord {
        let reason = err.to_string();
        log::warn!("halting at tick {}: {reason}", self.tick);
        record.events.push(Event::Fault);
        self.fault = Some(reason);
        self.tick += 1;
        record
    }
}

fn log_action(tick: u64, action: Option<Action>) {
    if let Some(a) = action {
        log::trace!("tick {tick}: {:?} pair {} column {:?}", a.kind, a.pair_index, a.column);
    }
}

/// Runs a scenario to completion (or to the first fault).
pub fn run_scenario(config: &ScenarioConfig) -> Result<RunOutput, SimulationError> {
    let mut session = Session::new(config.clone())?;
    let mut records = Vec::with_capacity(config.tick_count() as usize);
    while !session.is_finished() {
        records.push(session.step()?);
    }
    let metrics = compute_report(&records, config.metrics_compare);
    Ok(RunOutput {
        records,
        metrics,
        fault: session.fault.clone(),
    })
}
