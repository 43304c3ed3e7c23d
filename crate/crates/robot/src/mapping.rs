//! Gesture to joint mapping for the two control modes.

use emg_core::decoder::Mode;
use emg_core::Gesture;

use crate::joint::Joint;

/// Joint and direction a gesture drives in `mode`, or `None` for Rest and
/// Pinch Fingers (which only switches modes).
///
/// Positive directions: gripper opens, yaw left, pitch up, roll with the palm
/// turning up, lift raises, arm extends, base drives forward and rotates
/// counter-clockwise.
pub fn map_gesture(mode: Mode, gesture: Gesture) -> Option<(Joint, f64)> {
    use Gesture::*;
    let mapped = match mode {
        Mode::WristGripper => match gesture {
            FingersClosed => (Joint::Gripper, -1.0),
            FingersOpen => (Joint::Gripper, 1.0),
            WristLeft => (Joint::WristYaw, 1.0),
            WristRight => (Joint::WristYaw, -1.0),
            WristUp => (Joint::WristPitch, 1.0),
            WristDown => (Joint::WristPitch, -1.0),
            PalmUp => (Joint::WristRoll, 1.0),
            PalmDown => (Joint::WristRoll, -1.0),
            Rest | PinchFingers => return None,
        },
        Mode::ArmDrive => match gesture {
            WristUp => (Joint::Lift, 1.0),
            WristDown => (Joint::Lift, -1.0),
            FingersOpen => (Joint::ArmExtend, 1.0),
            FingersClosed => (Joint::ArmExtend, -1.0),
            WristRight => (Joint::BaseTranslate, 1.0),
            WristLeft => (Joint::BaseTranslate, -1.0),
            PalmDown => (Joint::BaseRotate, 1.0),
            PalmUp => (Joint::BaseRotate, -1.0),
            Rest | PinchFingers => return None,
        },
    };
    Some(mapped)
}
