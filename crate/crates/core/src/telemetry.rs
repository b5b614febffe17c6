//! Wire format of the live session: telemetry frames out, commands in.
//!
//! Every message is one JSON object with a `type` field. Frames are built only
//! from [`LogRecord`] fields.

use crate::config::ScenarioConfig;
use crate::runner::{Event, LogRecord};
use crate::types::{ForceVector, JointVector, Pose};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const TELEMETRY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub schema_version: u32,
    pub tick: u64,
    pub t: f64,
    /// True platform pose.
    pub pose: Pose,
    pub x_c: Pose,
    pub x_a: Pose,
    pub q_a: JointVector,
    pub q_d: JointVector,
    pub q_c: JointVector,
    pub min_omega_a: f64,
    pub min_omega_c: f64,
    pub pair: [usize; 2],
    pub dt: [i64; 4],
    pub ext_pin: u8,
    pub f_c: ForceVector,
    pub breached: bool,
    pub events: Vec<Event>,
}

impl From<&LogRecord> for TelemetryFrame {
    fn from(r: &LogRecord) -> Self {
        Self {
            schema_version: TELEMETRY_SCHEMA_VERSION,
            tick: r.tick,
            t: r.t,
            pose: r.x_true,
            x_c: r.x_c,
            x_a: r.x_a,
            q_a: r.q_a,
            q_d: r.q_d,
            q_c: r.q_c,
            min_omega_a: r.min_omega_a,
            min_omega_c: r.min_omega_c,
            pair: r.pair_c,
            dt: r.dt,
            ext_pin: r.ext_pin,
            f_c: r.f_c,
            breached: r.breached,
            events: r.events.clone(),
        }
    }
}

/// Messages sent by the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        schema_version: u32,
        /// Whether this client's commands are accepted.
        authority: bool,
        scenario: String,
        control_period: f64,
        decimation: u32,
    },
    Telemetry(TelemetryFrame),
    Ack {
        command: String,
        /// First tick whose record reflects the command.
        tick: u64,
        /// Force actually applied after clamping, for `force` commands.
        #[serde(skip_serializing_if = "Option::is_none", default)]
        applied: Option<ForceVector>,
    },
    Error {
        message: String,
    },
    /// The scenario reached its end or a fault; the session idles until reset.
    Finished {
        tick: u64,
        fault: Option<String>,
    },
}

impl ServerMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Force(ForceVector),
    Reset,
    LoadScenario(Box<ScenarioConfig>),
    Pause,
    Resume,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Force(_) => "force",
            Command::Reset => "reset",
            Command::LoadScenario(_) => "load_scenario",
            Command::Pause => "pause",
            Command::Resume => "resume",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandMessage {
    pub command: Command,
    /// Sender's clock, informational only.
    pub client_time: Option<f64>,
}

fn force_payload(payload: Option<&Value>) -> Result<ForceVector, String> {
    let obj = payload
        .and_then(Value::as_object)
        .ok_or("force command needs an object payload {fx, fz, my, mz}")?;
    for key in obj.keys() {
        if !["fx", "fz", "my", "mz"].contains(&key.as_str()) {
            return Err(format!("unknown force field {key:?}"));
        }
    }
    let get = |k: &str| -> Result<f64, String> {
        match obj.get(k) {
            None => Ok(0.0),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("force field {k:?} must be a finite number")),
        }
    };
    Ok(ForceVector::new(get("fx")?, get("fz")?, get("my")?, get("mz")?))
}

/// Parses one incoming text message.
pub fn parse_command(text: &str) -> Result<CommandMessage, String> {
    let v: Value = serde_json::from_str(text).map_err(|e| format!("malformed JSON: {e}"))?;
    let obj = v.as_object().ok_or("command must be a JSON object")?;
    let kind = obj
        .get("type")
        .and_then(Value::as_str)
        .ok_or("command needs a string \"type\" field")?;
    let client_time = obj.get("client_time").and_then(Value::as_f64);
    let payload = obj.get("payload");
    let command = match kind {
        "force" => Command::Force(force_payload(payload)?),
        "reset" => Command::Reset,
        "pause" => Command::Pause,
        "resume" => Command::Resume,
        "load_scenario" => {
            let p = payload.ok_or("load_scenario needs the scenario as payload")?;
            let cfg = ScenarioConfig::from_json_str(&p.to_string()).map_err(|e| e.to_string())?;
            Command::LoadScenario(Box::new(cfg))
        }
        other => return Err(format!("unknown command type {other:?}")),
    };
    Ok(CommandMessage { command, client_time })
}
