//! Delivery of joint commands to an in-process or remote simulator.

use emg_core::decoder::{DecoderOutput, Mode};
use emg_core::Gesture;
use emg_robot::{CommandSender, Commander, JointCommand, Robot, RobotConfig, RobotState};

pub enum RobotLink {
    /// Simulator owned by the gateway.
    Local(Robot),
    /// Simulator behind UDP; state comes from its replies.
    Remote {
        sender: CommandSender,
        commander: Commander,
        config: RobotConfig,
        state: Option<RobotState>,
    },
}

impl RobotLink {
    pub fn local(config: RobotConfig) -> Self {
        RobotLink::Local(Robot::new(config))
    }

    pub fn remote(addr: &str, config: RobotConfig) -> emg_robot::Result<Self> {
        Ok(RobotLink::Remote {
            sender: CommandSender::connect(addr)?,
            commander: Commander::new(),
            config,
            state: None,
        })
    }

    pub fn step(&mut self, out: &DecoderOutput) -> Result<Vec<JointCommand>, String> {
        match self {
            RobotLink::Local(robot) => Ok(robot.step_output(out)),
            RobotLink::Remote {
                sender,
                commander,
                config,
                ..
            } => {
                let cmds = commander.commands(config, &out.decoded(), out.mode);
                for c in &cmds {
                    sender.send(c).map_err(|e| e.to_string())?;
                }
                Ok(cmds)
            }
        }
    }

    /// Stops whatever joint is moving.
    pub fn halt(&mut self, tick: u64, mode: Mode) -> Result<Vec<JointCommand>, String> {
        let rest = DecoderOutput {
            tick,
            gesture: Gesture::Rest,
            consecutive_count: 1,
            raw: Gesture::Rest,
            probabilities: Vec::new(),
            confidence: Vec::new(),
            mode,
            mode_changed: false,
            injected: false,
        };
        match self {
            RobotLink::Local(robot) => {
                let dt = robot.config().tick_dt();
                Ok(robot.step(&rest.decoded(), mode, dt))
            }
            RobotLink::Remote { .. } => self.step(&rest),
        }
    }

    /// Latest known robot state.
    pub fn state(&mut self) -> Option<RobotState> {
        match self {
            RobotLink::Local(robot) => Some(robot.state().clone()),
            RobotLink::Remote { sender, state, .. } => {
                if let Ok(Some(s)) = sender.poll_state() {
                    *state = Some(s);
                }
                state.clone()
            }
        }
    }
}

