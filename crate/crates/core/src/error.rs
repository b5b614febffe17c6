use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("pose is not finite")]
    NonFinite,
    #[error("degenerate pose: limb {limb} has zero length")]
    DegeneratePose { limb: usize },
    #[error("universal joint angles of limb {limb} are indeterminate (sin q_l2 = 0)")]
    UniversalAngleSingularity { limb: usize },
    #[error("forward kinematics did not converge in {iterations} iterations (residual {residual:e} m^2)")]
    FkNoConvergence { iterations: usize, residual: f64 },
    #[error("forward kinematics Newton matrix is singular")]
    FkSingular,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScrewError {
    #[error("output twist of actuator {limb} has no angular part; its direction is undefined")]
    UndefinedDirection { limb: usize },
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {field}: {reason}")]
    Invalid { field: String, reason: String },
    #[error("configuration parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
}

impl ConfigError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("time step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("simulation fault at t = {time:.3} s: {reason}")]
    Fault { time: f64, reason: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Control(#[from] ControlError),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("log line {line}: {message}")]
    Log { line: usize, message: String },
}
