//! JSON messages exchanged with console clients.

use emg_core::decoder::Mode;
use emg_core::ingest::CuePreset;
use emg_core::Gesture;
use emg_robot::{JointCommand, RobotState};
use serde::{Deserialize, Deserializer, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    #[default]
    Idle,
    Calibrating,
    Training,
    Decoding,
}

/// Where the gateway reads EMG from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceDescriptor {
    /// No EMG; only injected gestures reach the decoder.
    #[default]
    None,
    /// Generated session following a cue preset.
    Synth {
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        setup_seed: u64,
        #[serde(default = "default_preset")]
        preset: CuePreset,
        #[serde(default)]
        cue_seed: u64,
    },
    /// Recording file, optionally with its cue sidecar.
    Recording {
        path: String,
        #[serde(default)]
        cues: Option<String>,
    },
    /// Live sample stream.
    Tcp { addr: String },
}

fn default_preset() -> CuePreset {
    CuePreset::Realtime
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub phase: Phase,
    /// Path of the loaded bundle, or `trained:<tick>` for one trained in
    /// this session.
    pub bundle: Option<String>,
    pub source: SourceDescriptor,
    pub tick: u64,
    pub clients: usize,
    pub mode: Mode,
}

/// Commands accepted from clients, tagged by `type`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientCommand {
    /// Idle → Decoding; needs a bundle.
    StartSession,
    LoadBundle { path: String },
    /// Idle → Calibrating. With `train`, the recorded cues train a bundle
    /// (Training) and decoding starts when it is ready.
    StartCues {
        #[serde(default = "default_cue_preset")]
        preset: CuePreset,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        train: bool,
        #[serde(default)]
        epochs: Option<usize>,
        #[serde(default)]
        save_to: Option<String>,
    },
    /// Replaces the classifier output of the next tick with a one-hot vector.
    InjectGesture {
        #[serde(deserialize_with = "gesture_loose")]
        gesture: Gesture,
    },
    SetSource { source: SourceDescriptor },
    /// Aborts the current phase and returns to Idle.
    Stop,
}

fn default_cue_preset() -> CuePreset {
    CuePreset::Initial
}

/// Accepts display names ("Wrist Up") and loose spellings ("wrist_up").
fn gesture_loose<'de, D: Deserializer<'de>>(d: D) -> Result<Gesture, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

pub const COMMAND_TYPES: [&str; 6] = [
    "start_session",
    "load_bundle",
    "start_cues",
    "inject_gesture",
    "set_source",
    "stop",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CuePhase {
    Rest,
    Transition,
    Hold,
    Return,
    /// Between series, or after the last cue.
    Pause,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UnknownCommand,
    BadRequest,
    IllegalTransition,
    BundleNotFound,
    BundleInvalid,
    SourceError,
    SourceEnded,
    TrainingFailed,
    RobotLink,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum EventBody {
    Cue {
        index: usize,
        count: usize,
        gesture: Gesture,
        phase: CuePhase,
        /// Seconds since the start of the cue run.
        time_s: f64,
        phase_remaining_s: f64,
        /// Inside the labeled final part of the hold.
        labeled: bool,
    },
    Prediction {
        gesture: Gesture,
        raw: Gesture,
        consecutive_count: u32,
        injected: bool,
        mode: Mode,
        commands: Vec<JointCommand>,
    },
    Confidence {
        probabilities: Vec<f64>,
        confidence: Vec<f64>,
    },
    RobotState(RobotState),
    Mode {
        mode: Mode,
        previous: Mode,
    },
    Session(SessionState),
    Error {
        code: ErrorCode,
        message: String,
    },
}

impl EventBody {
    pub fn kind(&self) -> &'static str {
        match self {
            EventBody::Cue { .. } => "cue",
            EventBody::Prediction { .. } => "prediction",
            EventBody::Confidence { .. } => "confidence",
            EventBody::RobotState(_) => "robot_state",
            EventBody::Mode { .. } => "mode",
            EventBody::Session(_) => "session",
            EventBody::Error { .. } => "error",
        }
    }

    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        EventBody::Error {
            code,
            message: message.into(),
        }
    }
}

/// One event as sent on the wire:
/// `{"seq":12,"tick":40,"type":"prediction","payload":{...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventMessage {
    pub seq: u64,
    pub tick: u64,
    #[serde(flatten)]
    pub body: EventBody,
}

/// Parses a client command, telling unknown command types apart from
/// malformed known ones.
pub fn parse_client_command(text: &str) -> Result<ClientCommand, (ErrorCode, String)> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| (ErrorCode::BadRequest, format!("invalid JSON: {e}")))?;
    match value.get("type").and_then(serde_json::Value::as_str) {
        // Unit variants would otherwise ignore stray fields.
        Some(t @ ("start_session" | "stop")) => {
            if let Some(extra) = value.as_object().and_then(|o| o.keys().find(|k| *k != "type")) {
                return Err((ErrorCode::BadRequest, format!("unknown field `{extra}` for '{t}'")));
            }
        }
        Some(t) if COMMAND_TYPES.contains(&t) => {}
        Some(t) => return Err((ErrorCode::UnknownCommand, format!("unknown command '{t}'"))),
        None => return Err((ErrorCode::BadRequest, "missing command type".into())),
    }
    serde_json::from_value(value).map_err(|e| (ErrorCode::BadRequest, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commands_parse() {
        assert_eq!(
            parse_client_command(r#"{"type":"inject_gesture","gesture":"Wrist Up"}"#).unwrap(),
            ClientCommand::InjectGesture {
                gesture: Gesture::WristUp
            }
        );
        assert_eq!(
            parse_client_command(r#"{"type":"inject_gesture","gesture":"wrist_up"}"#).unwrap(),
            ClientCommand::InjectGesture {
                gesture: Gesture::WristUp
            }
        );
        assert_eq!(parse_client_command(r#"{"type":"stop"}"#).unwrap(), ClientCommand::Stop);
        let cues = parse_client_command(r#"{"type":"start_cues","preset":"recalibration","train":true}"#).unwrap();
        assert!(matches!(cues, ClientCommand::StartCues { preset: CuePreset::Recalibration, train: true, .. }));
        let src = parse_client_command(r#"{"type":"set_source","source":{"kind":"synth","seed":3}}"#).unwrap();
        assert!(matches!(src, ClientCommand::SetSource { source: SourceDescriptor::Synth { seed: 3, preset: CuePreset::Realtime, .. } }));
    }

    #[test]
    fn command_errors_are_classified() {
        assert_eq!(parse_client_command(r#"{"type":"dance"}"#).unwrap_err().0, ErrorCode::UnknownCommand);
        assert_eq!(parse_client_command("{").unwrap_err().0, ErrorCode::BadRequest);
        assert_eq!(
            parse_client_command(r#"{"type":"inject_gesture","gesture":"Jazz Hands"}"#).unwrap_err().0,
            ErrorCode::BadRequest
        );
        assert_eq!(parse_client_command(r#"{"type":"load_bundle"}"#).unwrap_err().0, ErrorCode::BadRequest);
    }

    #[test]
    fn event_wire_shape() {
        let e = EventMessage {
            seq: 3,
            tick: 9,
            body: EventBody::Mode {
                mode: Mode::ArmDrive,
                previous: Mode::WristGripper,
            },
        };
        let v = serde_json::to_value(&e).unwrap();
        assert_eq!(v, serde_json::json!({"seq":3,"tick":9,"type":"mode","payload":{"mode":"ad","previous":"wg"}}));
        let back: EventMessage = serde_json::from_value(v).unwrap();
        assert_eq!(back, e);
    }
}
