use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gesture::Gesture;

/// Gesture-to-joint mapping in effect.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Wrist yaw/pitch/roll and gripper.
    #[default]
    #[serde(rename = "wg")]
    WristGripper,
    /// Lift, arm extension and mobile base.
    #[serde(rename = "ad")]
    ArmDrive,
}

impl Mode {
    pub fn code(self) -> &'static str {
        match self {
            Mode::WristGripper => "wg",
            Mode::ArmDrive => "ad",
        }
    }

    pub fn toggled(self) -> Mode {
        match self {
            Mode::WristGripper => Mode::ArmDrive,
            Mode::ArmDrive => Mode::WristGripper,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wg" | "wrist_gripper" | "wristgripper" => Ok(Mode::WristGripper),
            "ad" | "arm_drive" | "armdrive" => Ok(Mode::ArmDrive),
            _ => Err(Error::InvalidParameter(format!("unknown mode '{s}'"))),
        }
    }
}

/// Hold-to-toggle detector for the Pinch Fingers gesture.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSwitch {
    mode: Mode,
    hold_ticks: u32,
    cooldown_remaining: u32,
    hold_required: u32,
    cooldown_ticks: u32,
}

impl ModeSwitch {
    /// `hold_s` of uninterrupted Pinch outputs toggles the mode; afterwards
    /// holds are ignored for `cooldown_s`.
    pub fn new(hold_s: f64, cooldown_s: f64, tick_rate_hz: f64) -> Result<Self> {
        if !(tick_rate_hz > 0.0) || !(hold_s > 0.0) || !(cooldown_s >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mode switch hold={hold_s} cooldown={cooldown_s} rate={tick_rate_hz}"
            )));
        }
        Ok(Self {
            mode: Mode::default(),
            hold_ticks: 0,
            cooldown_remaining: 0,
            hold_required: ticks(hold_s * tick_rate_hz).max(1),
            cooldown_ticks: ticks(cooldown_s * tick_rate_hz),
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn hold_ticks(&self) -> u32 {
        self.hold_ticks
    }

    pub fn hold_required(&self) -> u32 {
        self.hold_required
    }

    pub fn cooldown_remaining(&self) -> u32 {
        self.cooldown_remaining
    }

    pub fn cooldown_ticks(&self) -> u32 {
        self.cooldown_ticks
    }

    /// Feeds one decoder output; returns the new mode when it toggles.
    pub fn update(&mut self, decoded: Gesture) -> Option<Mode> {
        if self.cooldown_remaining > 0 {
            self.cooldown_remaining -= 1;
            self.hold_ticks = 0;
            return None;
        }
        if decoded != Gesture::PinchFingers {
            self.hold_ticks = 0;
            return None;
        }
        self.hold_ticks += 1;
        if self.hold_ticks < self.hold_required {
            return None;
        }
        self.mode = self.mode.toggled();
        self.hold_ticks = 0;
        self.cooldown_remaining = self.cooldown_ticks;
        Some(self.mode)
    }
}

impl Default for ModeSwitch {
    fn default() -> Self {
        Self::new(3.0, 2.0, 6.0).expect("default parameters are valid")
    }
}

/// Whole ticks covering `x`, tolerant of float noise in products like 3.0·6.
fn ticks(x: f64) -> u32 {
    (x - 1e-9).ceil().max(0.0) as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn run(stream: &[Gesture]) -> Vec<usize> {
        let mut s = ModeSwitch::default();
        stream
            .iter()
            .enumerate()
            .filter_map(|(t, g)| s.update(*g).map(|_| t + 1))
            .collect()
    }

    #[test]
    fn eighteen_ticks_toggle_once() {
        assert_eq!(ModeSwitch::default().hold_required(), 18);
        assert_eq!(ModeSwitch::default().cooldown_ticks(), 12);
        assert_eq!(run(&[Gesture::PinchFingers; 18]), vec![18]);
    }

    #[test]
    fn seventeen_ticks_do_not_toggle() {
        let mut stream = vec![Gesture::PinchFingers; 17];
        stream.push(Gesture::Rest);
        stream.extend([Gesture::PinchFingers; 17]);
        assert!(run(&stream).is_empty());
    }

    #[test]
    fn cooldown_blocks_second_hold() {
        assert_eq!(run(&[Gesture::PinchFingers; 36]), vec![18]);
        // Hold restarts once the cooldown is over: 18 + 12 + 18.
        assert_eq!(run(&[Gesture::PinchFingers; 48]), vec![18, 48]);
    }

    #[test]
    fn mode_codes_round_trip() {
        for m in [Mode::WristGripper, Mode::ArmDrive] {
            assert_eq!(m.code().parse::<Mode>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.code()));
        }
    }

    proptest! {
        #[test]
        fn toggles_are_separated_by_hold_plus_cooldown(
            stream in proptest::collection::vec(prop_oneof![Just(Gesture::PinchFingers), Just(Gesture::PinchFingers), Just(Gesture::Rest), Just(Gesture::WristUp)], 0..400)
        ) {
            let toggles = run(&stream);
            for w in toggles.windows(2) {
                prop_assert!(w[1] - w[0] >= 18 + 12);
            }
        }
    }
}
