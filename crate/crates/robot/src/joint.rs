//! Joints of the manipulator and the commands addressed to them.

use std::fmt;
use std::str::FromStr;

use emg_core::decoder::Mode;
use serde::{Deserialize, Serialize};

use crate::error::RobotError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Joint {
    BaseTranslate,
    BaseRotate,
    Lift,
    #[serde(rename = "arm")]
    ArmExtend,
    WristYaw,
    WristPitch,
    WristRoll,
    Gripper,
}

impl Joint {
    pub const ALL: [Joint; 8] = [
        Joint::BaseTranslate,
        Joint::BaseRotate,
        Joint::Lift,
        Joint::ArmExtend,
        Joint::WristYaw,
        Joint::WristPitch,
        Joint::WristRoll,
        Joint::Gripper,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Wire name.
    pub fn name(self) -> &'static str {
        match self {
            Joint::BaseTranslate => "base_translate",
            Joint::BaseRotate => "base_rotate",
            Joint::Lift => "lift",
            Joint::ArmExtend => "arm",
            Joint::WristYaw => "wrist_yaw",
            Joint::WristPitch => "wrist_pitch",
            Joint::WristRoll => "wrist_roll",
            Joint::Gripper => "gripper",
        }
    }

    /// Base, lift and arm take velocities; wrist and gripper take position
    /// changes.
    pub fn kind(self) -> CommandKind {
        match self {
            Joint::BaseTranslate | Joint::BaseRotate | Joint::Lift | Joint::ArmExtend => CommandKind::Velocity,
            _ => CommandKind::PositionDelta,
        }
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Joint {
    type Err = RobotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Joint::ALL
            .into_iter()
            .find(|j| j.name() == s)
            .ok_or_else(|| RobotError::UnknownJoint(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CommandKind {
    #[serde(rename = "vel")]
    Velocity,
    #[serde(rename = "dpos")]
    PositionDelta,
}

impl CommandKind {
    pub fn code(self) -> &'static str {
        match self {
            CommandKind::Velocity => "vel",
            CommandKind::PositionDelta => "dpos",
        }
    }
}

impl FromStr for CommandKind {
    type Err = RobotError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vel" => Ok(CommandKind::Velocity),
            "dpos" => Ok(CommandKind::PositionDelta),
            _ => Err(RobotError::UnknownKind(s.to_string())),
        }
    }
}

/// One command for one joint. `value` is signed, in joint units per second
/// for velocities and joint units for position changes. A stop is value 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointCommand {
    pub joint: Joint,
    pub kind: CommandKind,
    pub value: f64,
    pub mode: Mode,
}

impl JointCommand {
    pub fn new(joint: Joint, value: f64, mode: Mode) -> Self {
        Self {
            joint,
            kind: joint.kind(),
            value,
            mode,
        }
    }

    pub fn stop(joint: Joint, mode: Mode) -> Self {
        Self::new(joint, 0.0, mode)
    }

    pub fn is_stop(&self) -> bool {
        self.value == 0.0
    }

    pub fn magnitude(&self) -> f64 {
        self.value.abs()
    }

    /// -1, 0 or +1.
    pub fn sign(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.value.signum()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for j in Joint::ALL {
            assert_eq!(j.name().parse::<Joint>().unwrap(), j);
            assert_eq!(serde_json::to_string(&j).unwrap(), format!("\"{}\"", j.name()));
        }
        assert!(matches!("elbow".parse::<Joint>(), Err(RobotError::UnknownJoint(t)) if t == "elbow"));
    }

    #[test]
    fn kinds_follow_joint_class() {
        assert_eq!(Joint::Lift.kind(), CommandKind::Velocity);
        assert_eq!(Joint::BaseRotate.kind(), CommandKind::Velocity);
        assert_eq!(Joint::WristRoll.kind(), CommandKind::PositionDelta);
        assert_eq!(Joint::Gripper.kind(), CommandKind::PositionDelta);
    }
}
