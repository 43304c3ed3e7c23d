//! Joint limits, gains and ramp scalars. Defaults approximate a Stretch RE2.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RobotError};
use crate::joint::Joint;
use crate::pid::PidGains;
use crate::ramp::DEFAULT_RAMP_CAP;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointConfig {
    /// Ramp scalar `a`. Unused by the gripper.
    pub ramp_a: f64,
    pub gains: PidGains,
    /// Position limits; `None` for the unbounded base axes.
    pub limits: Option<(f64, f64)>,
    /// Position at reset.
    pub home: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotConfig {
    pub base_translate: JointConfig,
    pub base_rotate: JointConfig,
    pub lift: JointConfig,
    pub arm: JointConfig,
    pub wrist_yaw: JointConfig,
    pub wrist_pitch: JointConfig,
    pub wrist_roll: JointConfig,
    pub gripper: JointConfig,
    /// Aperture change per gripper command.
    pub gripper_step: f64,
    pub ramp_cap: u32,
    pub tick_rate_hz: f64,
    pub substeps: u32,
}

const VELOCITY_GAINS: PidGains = PidGains {
    kp: 10.0,
    ki: 0.5,
    kd: 0.0,
};

const SERVO_GAINS: PidGains = PidGains {
    kp: 40.0,
    ki: 0.0,
    kd: 0.0,
};

fn joint(ramp_a: f64, gains: PidGains, limits: Option<(f64, f64)>, home: f64) -> JointConfig {
    JointConfig {
        ramp_a,
        gains,
        limits,
        home,
    }
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self {
            base_translate: joint(0.0008, VELOCITY_GAINS, None, 0.0),
            base_rotate: joint(0.0015, VELOCITY_GAINS, None, 0.0),
            lift: joint(0.0003, VELOCITY_GAINS, Some((0.0, 1.1)), 0.6),
            arm: joint(0.0003, VELOCITY_GAINS, Some((0.0, 0.52)), 0.1),
            wrist_yaw: joint(0.0002, SERVO_GAINS, Some((-1.75, 4.0)), 0.0),
            wrist_pitch: joint(0.0002, SERVO_GAINS, Some((-1.57, 0.56)), 0.0),
            wrist_roll: joint(0.0002, SERVO_GAINS, Some((-3.14, 3.14)), 0.0),
            gripper: joint(0.0, SERVO_GAINS, Some((0.0, 1.0)), 0.5),
            gripper_step: 0.05,
            ramp_cap: DEFAULT_RAMP_CAP,
            tick_rate_hz: 6.0,
            substeps: 10,
        }
    }
}

impl RobotConfig {
    pub fn joint(&self, j: Joint) -> &JointConfig {
        match j {
            Joint::BaseTranslate => &self.base_translate,
            Joint::BaseRotate => &self.base_rotate,
            Joint::Lift => &self.lift,
            Joint::ArmExtend => &self.arm,
            Joint::WristYaw => &self.wrist_yaw,
            Joint::WristPitch => &self.wrist_pitch,
            Joint::WristRoll => &self.wrist_roll,
            Joint::Gripper => &self.gripper,
        }
    }

    pub fn tick_dt(&self) -> f64 {
        1.0 / self.tick_rate_hz
    }

    /// Largest ramp output for `j`, used to scale the PID integral clamp.
    pub fn max_command(&self, j: Joint) -> f64 {
        crate::ramp::ramp_magnitude(self.joint(j).ramp_a, self.ramp_cap, self.ramp_cap)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RobotError::InvalidConfig(m));
        if !(self.tick_rate_hz.is_finite() && self.tick_rate_hz > 0.0) {
            return bad(format!("tick_rate_hz must be positive, got {}", self.tick_rate_hz));
        }
        if self.substeps == 0 {
            return bad("substeps must be at least 1".into());
        }
        if self.ramp_cap == 0 {
            return bad("ramp_cap must be at least 1".into());
        }
        if !(self.gripper_step.is_finite() && self.gripper_step > 0.0) {
            return bad(format!("gripper_step must be positive, got {}", self.gripper_step));
        }
        for j in Joint::ALL {
            let c = self.joint(j);
            let g = c.gains;
            if ![c.ramp_a, g.kp, g.ki, g.kd, c.home].iter().all(|x| x.is_finite()) {
                return bad(format!("{j}: non-finite parameter"));
            }
            if j != Joint::Gripper && c.ramp_a <= 0.0 {
                return bad(format!("{j}: ramp_a must be positive"));
            }
            if g.kp <= 0.0 || g.ki < 0.0 || g.kd < 0.0 {
                return bad(format!("{j}: gains must be nonnegative with kp > 0"));
            }
            // Explicit integration of a proportional loop diverges once kp·h reaches 2.
            let h = 1.0 / (self.tick_rate_hz * self.substeps as f64);
            if g.kp * h >= 1.0 {
                return bad(format!("{j}: kp {} too stiff for substep {h:.4} s", g.kp));
            }
            match c.limits {
                Some((lo, hi)) if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                    return bad(format!("{j}: limits must satisfy min < max"));
                }
                Some((lo, hi)) if !(lo..=hi).contains(&c.home) => {
                    return bad(format!("{j}: home {} outside [{lo}, {hi}]", c.home));
                }
                None if j != Joint::BaseTranslate && j != Joint::BaseRotate => {
                    return bad(format!("{j}: limits are required"));
                }
                _ => {}
            }
        }
        let (lo, hi) = self.gripper.limits.unwrap_or((0.0, 1.0));
        if lo < 0.0 || hi > 1.0 {
            return bad("gripper limits must lie in [0, 1]".into());
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let config: Self = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let c = RobotConfig::default();
        c.validate().unwrap();
        let back: RobotConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_file_keeps_defaults() {
        let c: RobotConfig = serde_json::from_str(r#"{"gripper_step": 0.1}"#).unwrap();
        assert_eq!(c.gripper_step, 0.1);
        assert_eq!(c.lift, RobotConfig::default().lift);
    }

    #[test]
    fn rejects_inverted_limits() {
        let mut c = RobotConfig::default();
        c.lift.limits = Some((1.0, 0.0));
        assert!(matches!(c.validate(), Err(RobotError::InvalidConfig(_))));
    }
}
