//! Versioned JSON messages exchanged with clients.
//!
//! Every message carries `"v": 1` and a snake_case `"type"` tag.

use mirroreyes::kinematics::{GestureKind, JointVector};
use mirroreyes::renderer::ExpressionMode;
use mirroreyes::scenario::{Condition, ErrorClass, ScenarioScript, TrialMetrics};
use mirroreyes::scene::{ActionEvent, ArmPhase};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("malformed message: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("unsupported protocol version {0}")]
    Version(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    /// Either a point or a scene entity.
    SetTarget {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        y: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        z: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        entity_id: Option<String>,
    },
    Request {
        text: String,
    },
    Stop {
        #[serde(default = "default_keyword")]
        keyword: String,
        /// Trial-relative sim time of the utterance; the current tick if absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        at: Option<f64>,
    },
    Gesture {
        kind: GestureKind,
    },
    SetMirror {
        on: bool,
    },
    LoadScenario {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inline: Option<ScenarioScript>,
    },
    SetExpression {
        mode: ExpressionMode,
    },
}

fn default_keyword() -> String {
    "stop".into()
}

impl Command {
    pub fn point(x: f64, y: f64, z: f64) -> Self {
        Command::SetTarget {
            x: Some(x),
            y: Some(y),
            z: Some(z),
            entity_id: None,
        }
    }

    pub fn stop_at(at: f64) -> Self {
        Command::Stop {
            keyword: default_keyword(),
            at: Some(at),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub v: u32,
    #[serde(flatten)]
    pub body: T,
}

impl<T> Envelope<T> {
    pub fn new(body: T) -> Self {
        Self {
            v: PROTOCOL_VERSION,
            body,
        }
    }
}

pub fn encode_command(cmd: &Command) -> String {
    serde_json::to_string(&Envelope::new(cmd)).expect("commands serialize")
}

pub fn decode_command(text: &str) -> Result<Command, ProtocolError> {
    #[derive(Deserialize)]
    struct Version {
        v: u32,
    }
    let Version { v } = serde_json::from_str(text)?;
    if v != PROTOCOL_VERSION {
        return Err(ProtocolError::Version(v));
    }
    let mut value: serde_json::Value = serde_json::from_str(text)?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("v");
    }
    Ok(serde_json::from_value(value)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionState {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_id: Option<String>,
    pub position: [f64; 3],
    /// Largest distance of a gaze ray from the target, meters.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadPose {
    pub screen_normal: [f64; 3],
    /// `[right, left]`
    pub eye_centers: [[f64; 3]; 2],
    pub gaze_dirs: [[f64; 3]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStatus {
    pub index: usize,
    pub instruction: String,
    pub pick_id: String,
    pub place_id: String,
    pub error_class: ErrorClass,
    /// Onset-relative time of this tick.
    pub t: f64,
    pub phase: ArmPhase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub held_object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityPose {
    pub id: String,
    pub position: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    pub tick: u64,
    pub sim_time: f64,
    pub q: JointVector,
    /// Rendered pupil centers on the eye raster, `[right, left]`.
    pub pupils_px: [[f64; 2]; 2],
    pub expression: ExpressionMode,
    pub mirror_enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<Condition>,
    pub attention: AttentionState,
    pub head: HeadPose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial: Option<TrialStatus>,
    pub entities: Vec<EntityPose>,
    /// Base64 PNG pupil images, `[right, left]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlays: Option<[String; 2]>,
    /// Action events emitted this tick.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<ActionEvent>,
    /// Trials finished this tick.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub finished: Vec<TrialMetrics>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot(Box<StateSnapshot>),
    Error { message: String },
}

pub fn encode_server(msg: &ServerMessage) -> String {
    serde_json::to_string(&Envelope::new(msg)).expect("server messages serialize")
}

pub fn decode_server(text: &str) -> Result<ServerMessage, ProtocolError> {
    let env: Envelope<ServerMessage> = serde_json::from_str(text)?;
    if env.v != PROTOCOL_VERSION {
        return Err(ProtocolError::Version(env.v));
    }
    Ok(env.body)
}
