//! Kinematics, Type II singularity avoidance and admittance control for a
//! 3UPS+RPU parallel rehabilitation robot, with a deterministic simulator.

pub mod admittance;
pub mod avoidance;
pub mod config;
pub mod error;
pub mod geometry;
pub mod kinematics;
pub mod log_io;
pub mod metrics;
pub mod plant;
pub mod runner;
pub mod screw;
pub mod sensors;
pub mod telemetry;
pub mod types;

pub use config::{ControllerMode, ScenarioConfig};
pub use error::{ConfigError, ControlError, IoError, KinematicsError, ScrewError, SimulationError};
pub use geometry::{AnchorLayout, RobotGeometry};
pub use runner::{run_scenario, Event, LogRecord, RunOutput, Session};
pub use types::{ForceVector, JointVector, Pose};
