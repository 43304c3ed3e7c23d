//! Line-JSON command datagrams.
//!
//! `{"v":1,"seq":7,"joint":"lift","kind":"vel","value":0.0,"mode":"ad"}`

use emg_core::decoder::Mode;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RobotError};
use crate::joint::{CommandKind, Joint, JointCommand};

pub const WIRE_VERSION: u64 = 1;
pub const DEFAULT_UDP_PORT: u16 = 8855;

#[derive(Serialize)]
struct Encoded<'a> {
    v: u64,
    seq: u32,
    joint: &'a str,
    kind: &'a str,
    value: f64,
    mode: &'a str,
}

#[derive(Deserialize)]
struct Decoded {
    v: u64,
    seq: u32,
    joint: String,
    kind: String,
    value: f64,
    mode: String,
}

/// `cmd.value` must be finite.
pub fn encode_command(cmd: &JointCommand, seq: u32) -> Vec<u8> {
    debug_assert!(cmd.value.is_finite());
    let e = Encoded {
        v: WIRE_VERSION,
        seq,
        joint: cmd.joint.name(),
        kind: cmd.kind.code(),
        value: cmd.value,
        mode: cmd.mode.code(),
    };
    serde_json::to_vec(&e).expect("command serializes")
}

/// Parses one datagram. A trailing newline is accepted.
pub fn parse_command(datagram: &[u8]) -> Result<(u32, JointCommand)> {
    let text = std::str::from_utf8(datagram).map_err(|e| RobotError::Malformed(e.to_string()))?;
    let value: serde_json::Value =
        serde_json::from_str(text.trim_end()).map_err(|e| RobotError::Malformed(e.to_string()))?;
    // Check the version before the schema so future layouts report cleanly.
    match value.get("v").and_then(serde_json::Value::as_u64) {
        Some(WIRE_VERSION) => {}
        Some(v) => return Err(RobotError::UnsupportedVersion(v)),
        None => return Err(RobotError::Malformed("missing version".into())),
    }
    let d: Decoded = serde_json::from_value(value).map_err(|e| RobotError::Malformed(e.to_string()))?;
    debug_assert_eq!(d.v, WIRE_VERSION);
    let joint: Joint = d.joint.parse()?;
    let kind: CommandKind = d.kind.parse()?;
    if kind != joint.kind() {
        return Err(RobotError::KindMismatch {
            joint: joint.name(),
            expected: joint.kind().code(),
            actual: kind.code(),
        });
    }
    let mode: Mode = d.mode.parse().map_err(|_| RobotError::UnknownMode(d.mode.clone()))?;
    Ok((
        d.seq,
        JointCommand {
            joint,
            kind,
            value: d.value,
            mode,
        },
    ))
}

/// Drops datagrams whose sequence number is not newer than the last one
/// accepted.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SeqFilter {
    last: Option<u32>,
    dropped: u64,
}

impl SeqFilter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accept(&mut self, seq: u32) -> bool {
        match self.last {
            Some(last) if seq <= last => {
                self.dropped += 1;
                false
            }
            _ => {
                self.last = Some(seq);
                true
            }
        }
    }

    pub fn last(&self) -> Option<u32> {
        self.last
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stop_on_lift_matches_reference_line() {
        let line = encode_command(&JointCommand::stop(Joint::Lift, Mode::ArmDrive), 7);
        assert_eq!(
            std::str::from_utf8(&line).unwrap(),
            r#"{"v":1,"seq":7,"joint":"lift","kind":"vel","value":0.0,"mode":"ad"}"#
        );
    }

    #[test]
    fn rejections() {
        let unknown = br#"{"v":1,"seq":1,"joint":"elbow","kind":"vel","value":0.0,"mode":"ad"}"#;
        assert!(matches!(parse_command(unknown), Err(RobotError::UnknownJoint(t)) if t == "elbow"));
        let v2 = br#"{"v":2,"seq":1,"joint":"lift","kind":"vel","value":0.0,"mode":"ad"}"#;
        let err = parse_command(v2).unwrap_err();
        assert!(err.to_string().contains("unsupported version"));
        let wrong_kind = br#"{"v":1,"seq":1,"joint":"lift","kind":"dpos","value":0.0,"mode":"ad"}"#;
        assert!(matches!(parse_command(wrong_kind), Err(RobotError::KindMismatch { .. })));
        assert!(matches!(parse_command(b"{\"v\":1,"), Err(RobotError::Malformed(_))));
        assert!(matches!(parse_command(&[0xff, 0xfe]), Err(RobotError::Malformed(_))));
        let bad_mode = br#"{"v":1,"seq":1,"joint":"lift","kind":"vel","value":0.0,"mode":"xx"}"#;
        assert!(matches!(parse_command(bad_mode), Err(RobotError::UnknownMode(_))));
    }

    #[test]
    fn stale_sequence_is_dropped() {
        let mut f = SeqFilter::new();
        assert!(f.accept(9));
        assert!(!f.accept(5));
        assert!(!f.accept(9));
        assert_eq!(f.dropped(), 2);
        assert!(f.accept(10));
    }

    pub(crate) fn command() -> impl Strategy<Value = JointCommand> {
        (
            prop::sample::select(Joint::ALL.to_vec()),
            prop_oneof![Just(0.0), -10.0f64..10.0, any::<f64>().prop_filter("finite", |v| v.is_finite())],
            prop::bool::ANY,
        )
            .prop_map(|(j, v, ad)| {
                JointCommand::new(j, v, if ad { Mode::ArmDrive } else { Mode::WristGripper })
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn round_trip(cmd in command(), seq in any::<u32>()) {
            let bytes = encode_command(&cmd, seq);
            let (s, back) = parse_command(&bytes).unwrap();
            prop_assert_eq!(s, seq);
            prop_assert_eq!(back, cmd);
            prop_assert_eq!(back.value.to_bits(), cmd.value.to_bits());
        }
    }
}
