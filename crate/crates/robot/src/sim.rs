//! Command generation and kinematic simulation of the 8-DoF manipulator.

use std::collections::BTreeMap;

use emg_core::decoder::{DecodedGesture, DecoderOutput, Mode};
use serde::{Deserialize, Serialize};

use crate::config::RobotConfig;
use crate::joint::{CommandKind, Joint, JointCommand};
use crate::mapping::map_gesture;
use crate::pid::Pid;
use crate::ramp::ramp_magnitude;

const N: usize = Joint::ALL.len();

/// One value per joint, serialized as an object keyed by joint name.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(into = "BTreeMap<Joint, f64>", try_from = "BTreeMap<Joint, f64>")]
pub struct JointValues(pub [f64; N]);

impl JointValues {
    pub fn get(&self, j: Joint) -> f64 {
        self.0[j.index()]
    }
}

impl From<JointValues> for BTreeMap<Joint, f64> {
    fn from(v: JointValues) -> Self {
        Joint::ALL.iter().map(|&j| (j, v.get(j))).collect()
    }
}

impl TryFrom<BTreeMap<Joint, f64>> for JointValues {
    type Error = String;

    fn try_from(m: BTreeMap<Joint, f64>) -> Result<Self, Self::Error> {
        let mut out = [0.0; N];
        for j in Joint::ALL {
            out[j.index()] = *m.get(&j).ok_or_else(|| format!("missing joint {j}"))?;
        }
        Ok(JointValues(out))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BasePose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WristPose {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

/// Snapshot of the simulated robot.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub tick: u64,
    pub time_s: f64,
    pub base_pose: BasePose,
    pub lift: f64,
    pub arm_extension: f64,
    pub wrist: WristPose,
    pub gripper: f64,
    pub velocities: JointValues,
    pub mode: Mode,
    /// Joints clamped at a limit during the last tick.
    pub at_limit: Vec<Joint>,
}

/// Turns decoded gestures into joint commands, stopping the previously
/// driven joint whenever the driven joint changes.
#[derive(Clone, Debug, Default)]
pub struct Commander {
    last: Option<Joint>,
}

impl Commander {
    pub fn new() -> Self {
        Self::default()
    }

    /// Joint commanded on the previous tick, if it is still moving.
    pub fn active_joint(&self) -> Option<Joint> {
        self.last
    }

    pub fn commands(&mut self, config: &RobotConfig, decoded: &DecodedGesture, mode: Mode) -> Vec<JointCommand> {
        let mut out = Vec::with_capacity(2);
        let mapped = map_gesture(mode, decoded.label);
        let next = mapped.map(|(j, _)| j);
        if let Some(prev) = self.last {
            if Some(prev) != next {
                out.push(JointCommand::stop(prev, mode));
            }
        }
        if let Some((joint, sign)) = mapped {
            let magnitude = if joint == Joint::Gripper {
                config.gripper_step
            } else {
                ramp_magnitude(config.joint(joint).ramp_a, decoded.consecutive_count, config.ramp_cap)
            };
            out.push(JointCommand::new(joint, sign * magnitude, mode));
        }
        self.last = next;
        out
    }
}

/// Kinematic joint models. Velocity joints integrate a PID-tracked velocity,
/// wrist joints are PID position servos, and the gripper steps directly.
#[derive(Clone, Debug)]
pub struct Simulator {
    config: RobotConfig,
    q: [f64; N],
    v: [f64; N],
    /// Velocity setpoint for velocity joints, position target for servos.
    setpoint: [f64; N],
    pid: Vec<Pid>,
    pending_gripper: f64,
    pending_limits: [bool; N],
    state: RobotState,
}

impl Simulator {
    pub fn new(config: RobotConfig) -> Self {
        let pid = Joint::ALL
            .iter()
            .map(|&j| Pid::new(config.joint(j).gains, 10.0 * config.max_command(j)))
            .collect();
        let mut sim = Self {
            q: [0.0; N],
            v: [0.0; N],
            setpoint: [0.0; N],
            pid,
            pending_gripper: 0.0,
            pending_limits: [false; N],
            state: RobotState {
                tick: 0,
                time_s: 0.0,
                base_pose: BasePose::default(),
                lift: 0.0,
                arm_extension: 0.0,
                wrist: WristPose::default(),
                gripper: 0.0,
                velocities: JointValues::default(),
                mode: Mode::default(),
                at_limit: Vec::new(),
            },
            config,
        };
        sim.reset();
        sim
    }

    pub fn config(&self) -> &RobotConfig {
        &self.config
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn reset(&mut self) {
        for j in Joint::ALL {
            let i = j.index();
            self.q[i] = self.config.joint(j).home;
            self.v[i] = 0.0;
            self.setpoint[i] = match j.kind() {
                CommandKind::Velocity => 0.0,
                CommandKind::PositionDelta => self.q[i],
            };
            self.pid[i].reset();
        }
        self.pending_gripper = 0.0;
        self.pending_limits = [false; N];
        self.state.base_pose = BasePose::default();
        self.state.tick = 0;
        self.state.time_s = 0.0;
        self.state.mode = Mode::default();
        self.publish(Vec::new());
    }

    pub fn apply(&mut self, cmd: &JointCommand) {
        debug_assert_eq!(cmd.kind, cmd.joint.kind());
        self.state.mode = cmd.mode;
        let j = cmd.joint;
        let i = j.index();
        if !cmd.value.is_finite() {
            return;
        }
        if j == Joint::Gripper {
            self.pending_gripper += cmd.value;
            return;
        }
        match j.kind() {
            CommandKind::Velocity => {
                if cmd.is_stop() {
                    self.pid[i].reset();
                }
                self.setpoint[i] = cmd.value;
            }
            CommandKind::PositionDelta => {
                if cmd.is_stop() {
                    self.pid[i].reset();
                    self.setpoint[i] = self.q[i];
                } else {
                    let (t, hit) = self.clamp(j, self.setpoint[i] + cmd.value);
                    self.setpoint[i] = t;
                    self.pending_limits[i] |= hit;
                }
            }
        }
    }

    fn clamp(&self, j: Joint, x: f64) -> (f64, bool) {
        match self.config.joint(j).limits {
            Some((lo, hi)) => {
                let c = x.clamp(lo, hi);
                (c, c != x)
            }
            None => (x, false),
        }
    }

    /// Advances one command tick of `dt` seconds.
    pub fn advance(&mut self, dt: f64) -> &RobotState {
        debug_assert!(dt > 0.0);
        let mut hit = std::mem::take(&mut self.pending_limits);
        let g = Joint::Gripper.index();
        let before = self.q[g];
        let (aperture, clamped) = self.clamp(Joint::Gripper, before + self.pending_gripper);
        self.pending_gripper = 0.0;
        self.q[g] = aperture;
        self.setpoint[g] = aperture;
        self.v[g] = (aperture - before) / dt;
        hit[g] |= clamped;

        let substeps = self.config.substeps.max(1);
        let h = dt / substeps as f64;
        for _ in 0..substeps {
            for j in Joint::ALL {
                let i = j.index();
                if j == Joint::Gripper {
                    continue;
                }
                match j.kind() {
                    CommandKind::Velocity => {
                        if self.setpoint[i] == 0.0 {
                            // Braking: an integral wound up while slowing would push
                            // the joint back out of rest.
                            self.pid[i].reset();
                        }
                        let u = self.pid[i].update(self.setpoint[i] - self.v[i], h);
                        self.v[i] += u * h;
                    }
                    CommandKind::PositionDelta => {
                        self.v[i] = self.pid[i].update(self.setpoint[i] - self.q[i], h);
                    }
                }
                if j == Joint::BaseTranslate {
                    continue;
                }
                let (q, clamped) = self.clamp(j, self.q[i] + self.v[i] * h);
                self.q[i] = q;
                if clamped {
                    self.v[i] = 0.0;
                    hit[i] = true;
                }
            }
            let t = Joint::BaseTranslate.index();
            let heading = self.q[Joint::BaseRotate.index()];
            self.q[t] += self.v[t] * h;
            self.state.base_pose.x += self.v[t] * heading.cos() * h;
            self.state.base_pose.y += self.v[t] * heading.sin() * h;
        }
        self.state.tick += 1;
        self.state.time_s += dt;
        let at_limit = Joint::ALL.into_iter().filter(|j| hit[j.index()]).collect();
        self.publish(at_limit);
        &self.state
    }

    fn publish(&mut self, at_limit: Vec<Joint>) {
        let q = |j: Joint| self.q[j.index()];
        self.state.base_pose.heading = q(Joint::BaseRotate);
        self.state.lift = q(Joint::Lift);
        self.state.arm_extension = q(Joint::ArmExtend);
        self.state.wrist = WristPose {
            yaw: q(Joint::WristYaw),
            pitch: q(Joint::WristPitch),
            roll: q(Joint::WristRoll),
        };
        self.state.gripper = q(Joint::Gripper);
        self.state.velocities = JointValues(self.v);
        self.state.at_limit = at_limit;
    }

    /// Current velocity setpoint of a velocity joint, or position target of
    /// a servoed joint.
    pub fn setpoint(&self, j: Joint) -> f64 {
        self.setpoint[j.index()]
    }
}

/// Commander and simulator driven together, one decoder tick at a time.
#[derive(Clone, Debug)]
pub struct Robot {
    commander: Commander,
    sim: Simulator,
}

impl Robot {
    pub fn new(config: RobotConfig) -> Self {
        Self {
            commander: Commander::new(),
            sim: Simulator::new(config),
        }
    }

    pub fn state(&self) -> &RobotState {
        self.sim.state()
    }

    pub fn simulator(&self) -> &Simulator {
        &self.sim
    }

    pub fn config(&self) -> &RobotConfig {
        self.sim.config()
    }

    pub fn reset(&mut self) {
        self.commander = Commander::new();
        self.sim.reset();
    }

    /// Generates this tick's commands, applies them and advances by `dt`.
    pub fn step(&mut self, decoded: &DecodedGesture, mode: Mode, dt: f64) -> Vec<JointCommand> {
        let cmds = self.commander.commands(self.sim.config(), decoded, mode);
        for c in &cmds {
            self.sim.apply(c);
        }
        self.sim.state.mode = mode;
        self.sim.advance(dt);
        cmds
    }

    pub fn step_output(&mut self, out: &DecoderOutput) -> Vec<JointCommand> {
        let dt = self.sim.config().tick_dt();
        self.step(&out.decoded(), out.mode, dt)
    }
}
