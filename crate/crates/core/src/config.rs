//! Scenario configuration: JSON schema, defaults and validation.
//!
//! Every section is optional; omitted fields take the shipped defaults, so an
//! empty object `{}` is a complete scenario. Unknown fields are rejected.

use crate::admittance::AdmittanceParams;
use crate::avoidance::AvoidanceParams;
use crate::error::ConfigError;
use crate::geometry::{
    AnchorLayout, RobotGeometry, DEFAULT_HOME, DEFAULT_JOINT_MAX, DEFAULT_JOINT_MIN, DEFAULT_SOCKET_LIMIT_DEG,
};
use crate::plant::PlantParams;
use crate::sensors::{ForceScript, ForceSensorParams, ForceSource, PoseSensorParams};
use crate::types::{ForceVector, Pose};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerMode {
    Conventional,
    #[default]
    Complemented,
}

impl std::str::FromStr for ControllerMode {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, ConfigError> {
        match s {
            "conventional" => Ok(Self::Conventional),
            "complemented" => Ok(Self::Complemented),
            other => Err(ConfigError::invalid(
                "mode",
                format!("expected conventional or complemented, got {other:?}"),
            )),
        }
    }
}

impl std::fmt::Display for ControllerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Conventional => "conventional",
            Self::Complemented => "complemented",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub t: f64,
    pub pose: Pose,
}

/// Position reference `X_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSource {
    Constant { pose: Pose },
    /// Piecewise-linear in time, held at the ends.
    Waypoints { points: Vec<Waypoint> },
}

impl Default for ReferenceSource {
    fn default() -> Self {
        ReferenceSource::Constant { pose: DEFAULT_HOME }
    }
}

impl ReferenceSource {
    pub fn at(&self, t: f64) -> Pose {
        match self {
            ReferenceSource::Constant { pose } => *pose,
            ReferenceSource::Waypoints { points } => {
                let Some(first) = points.first() else {
                    return DEFAULT_HOME;
                };
                if t <= first.t {
                    return first.pose;
                }
                for w in points.windows(2) {
                    if t < w[1].t {
                        let a = (t - w[0].t) / (w[1].t - w[0].t);
                        return Pose::from_vector(&(w[0].pose.to_vector() * (1.0 - a) + w[1].pose.to_vector() * a));
                    }
                }
                points.last().expect("non-empty").pose
            }
        }
    }
}

/// Geometry section. Anchors may be given explicitly or generated from a layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub layout: Option<AnchorLayout>,
    /// `[A0, B0, C0, D0]`
    pub fixed_anchors: Option<[[f64; 3]; 4]>,
    /// `[A1, B1, C1]`
    pub mobile_anchors: Option<[[f64; 3]; 3]>,
    pub joint_min: [f64; 4],
    pub joint_max: [f64; 4],
    pub socket_limit_deg: [f64; 3],
    pub home: Pose,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            layout: None,
            fixed_anchors: None,
            mobile_anchors: None,
            joint_min: DEFAULT_JOINT_MIN,
            joint_max: DEFAULT_JOINT_MAX,
            socket_limit_deg: DEFAULT_SOCKET_LIMIT_DEG,
            home: DEFAULT_HOME,
        }
    }
}

impl GeometryConfig {
    pub fn resolve(&self) -> Result<RobotGeometry, ConfigError> {
        let mut g = match (&self.layout, self.fixed_anchors, self.mobile_anchors) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(ConfigError::invalid(
                    "geometry",
                    "give either layout or explicit anchors, not both",
                ))
            }
            (_, Some(f), Some(m)) => RobotGeometry::from_anchors(f.map(Vector3::from), m.map(Vector3::from)),
            (_, Some(_), None) | (_, None, Some(_)) => {
                return Err(ConfigError::invalid(
                    "geometry",
                    "fixed_anchors and mobile_anchors must be given together",
                ))
            }
            (layout, None, None) => RobotGeometry::from_layout(&layout.unwrap_or_default())?,
        };
        g.joint_min = self.joint_min;
        g.joint_max = self.joint_max;
        g.socket_limit_deg = self.socket_limit_deg;
        g.home = self.home;
        g.validate()?;
        Ok(g)
    }

    pub fn from_geometry(g: &RobotGeometry) -> Self {
        Self {
            layout: None,
            fixed_anchors: Some(g.fixed_anchors.map(|v| [v.x, v.y, v.z])),
            mobile_anchors: Some(g.mobile_anchors.map(|v| [v.x, v.y, v.z])),
            joint_min: g.joint_min,
            joint_max: g.joint_max,
            socket_limit_deg: g.socket_limit_deg,
            home: g.home,
        }
    }
}

/// Which joint vector the deviation metrics compare against `q_a = IK(X_a)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricsCompare {
    /// `q_d`, the avoidance command.
    #[default]
    Desired,
    /// `q_c`, the measured actuator lengths.
    Measured,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TelemetryConfig {
    /// Stream every n-th tick.
    pub decimation: u32,
}

impl Default for TelemetryConfig {
    fn default() -> Self {
        Self { decimation: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvoidanceConfig {
    pub v_d: f64,
    pub omega_lim: f64,
}

impl Default for AvoidanceConfig {
    fn default() -> Self {
        let p = AvoidanceParams::default();
        Self {
            v_d: p.v_d,
            omega_lim: p.omega_lim,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub mode: ControllerMode,
    pub seed: u64,
    /// s
    pub duration: f64,
    /// Control period `t_s` (s); also the avoidance step time.
    pub control_period: f64,
    pub geometry: GeometryConfig,
    pub admittance: AdmittanceParams,
    pub avoidance: AvoidanceConfig,
    pub plant: PlantParams,
    pub pose_sensor: PoseSensorParams,
    pub force_sensor: ForceSensorParams,
    pub reference: ReferenceSource,
    /// Initial true pose; defaults to the reference at t = 0.
    pub start_pose: Option<Pose>,
    /// Force reference `F_r`.
    pub force_reference: ForceVector,
    pub force_source: ForceSource,
    pub metrics_compare: MetricsCompare,
    pub telemetry: TelemetryConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: "default".into(),
            mode: ControllerMode::Complemented,
            seed: 0,
            duration: 10.0,
            control_period: 0.01,
            geometry: GeometryConfig::default(),
            admittance: AdmittanceParams::default(),
            avoidance: AvoidanceConfig::default(),
            plant: PlantParams::default(),
            pose_sensor: PoseSensorParams::default(),
            force_sensor: ForceSensorParams::default(),
            reference: ReferenceSource::default(),
            start_pose: None,
            force_reference: ForceVector::ZERO,
            force_source: ForceSource::default(),
            metrics_compare: MetricsCompare::Desired,
            telemetry: TelemetryConfig::default(),
        }
    }
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::invalid(field, format!("must be positive and finite, got {v}")))
    }
}

fn non_negative(field: &str, values: &[f64]) -> Result<(), ConfigError> {
    match values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
        Some(v) => Err(ConfigError::invalid(field, format!("must be non-negative and finite, got {v}"))),
        None => Ok(()),
    }
}

impl ScenarioConfig {
    pub fn avoidance_params(&self) -> AvoidanceParams {
        AvoidanceParams {
            v_d: self.avoidance.v_d,
            t_s: self.control_period,
            omega_lim: self.avoidance.omega_lim,
        }
    }

    pub fn start(&self) -> Pose {
        self.start_pose.unwrap_or_else(|| self.reference.at(0.0))
    }

    pub fn tick_count(&self) -> u64 {
        (self.duration / self.control_period).round() as u64
    }

    /// Checks the configuration and returns the resolved geometry.
    pub fn validate(&self) -> Result<RobotGeometry, ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::invalid(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        positive("control_period", self.control_period)?;
        positive("duration", self.duration)?;
        positive("avoidance.v_d", self.avoidance.v_d)?;
        positive("avoidance.omega_lim", self.avoidance.omega_lim)?;
        if !self.admittance.is_valid() {
            return Err(ConfigError::invalid("admittance", "k, c and m must be positive and finite"));
        }
        if !self.plant.servo.is_valid() {
            return Err(ConfigError::invalid("plant.servo", "gains and limits must be positive and finite"));
        }
        positive("plant.substep", self.plant.substep)?;
        if self.plant.substep > self.control_period {
            return Err(ConfigError::invalid("plant.substep", "must not exceed control_period"));
        }
        positive("plant.breach_threshold", self.plant.breach_threshold)?;
        non_negative("plant.drift_speed", &[self.plant.drift_speed])?;
        non_negative("plant.fold_margin", &[self.plant.fold_margin])?;
        non_negative("pose_sensor.noise_sigma", &self.pose_sensor.noise_sigma)?;
        non_negative("pose_sensor.latency", &[self.pose_sensor.latency])?;
        if let Some(r) = self.pose_sensor.rate_hz {
            positive("pose_sensor.rate_hz", r)?;
        }
        let fs = &self.force_sensor;
        non_negative("force_sensor.resolution", &fs.resolution)?;
        non_negative("force_sensor.noise_sigma", &fs.noise_sigma)?;
        non_negative("force_sensor.dead_zone_sigmas", &[fs.dead_zone_sigmas])?;
        for (i, r) in fs.range.iter().enumerate() {
            positive(&format!("force_sensor.range[{i}]"), *r)?;
        }
        if !self.force_reference.is_finite() {
            return Err(ConfigError::invalid("force_reference", "must be finite"));
        }
        if self.telemetry.decimation == 0 {
            return Err(ConfigError::invalid("telemetry.decimation", "must be at least 1"));
        }
        if let ReferenceSource::Waypoints { points } = &self.reference {
            if points.is_empty() {
                return Err(ConfigError::invalid("reference.points", "at least one waypoint is required"));
            }
            if points.windows(2).any(|w| !(w[1].t > w[0].t)) {
                return Err(ConfigError::invalid("reference.points", "waypoint times must increase strictly"));
            }
            if points.iter().any(|w| !w.t.is_finite() || !w.pose.is_finite()) {
                return Err(ConfigError::invalid("reference.points", "waypoints must be finite"));
            }
        }
        if let Some(script) = self.force_source.script() {
            script.validate()?;
        }
        let geometry = self.geometry.resolve()?;
        let start = self.start();
        if !start.is_finite() {
            return Err(ConfigError::invalid("start_pose", "must be finite"));
        }
        crate::kinematics::joint_lengths(&start, &geometry)
            .map_err(|e| ConfigError::invalid("start_pose", e.to_string()))?;
        Ok(geometry)
    }

    pub fn force_script(&self) -> Option<ForceScript> {
        self.force_source.script()
    }

    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Reads, parses and validates a scenario file.
pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    ScenarioConfig::from_json_str(&text)
}
