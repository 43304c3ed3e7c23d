//! Gesture-driven teleoperation of a simulated 8-DoF mobile manipulator.
//!
//! Decoded gestures become joint commands through [`mapping`] and [`ramp`],
//! travel as line-JSON datagrams ([`wire`], [`udp`]) and drive the kinematic
//! [`sim`].

pub mod config;
pub mod error;
pub mod joint;
pub mod mapping;
pub mod pid;
pub mod ramp;
pub mod sim;
pub mod udp;
pub mod wire;

pub use config::{JointConfig, RobotConfig};
pub use error::{Result, RobotError};
pub use joint::{CommandKind, Joint, JointCommand};
pub use mapping::map_gesture;
pub use pid::{Pid, PidGains};
pub use ramp::{ramp_magnitude, DEFAULT_RAMP_CAP};
pub use sim::{BasePose, Commander, JointValues, Robot, RobotState, Simulator, WristPose};
pub use udp::{serve_simulator, CommandReceiver, CommandSender, ReceiverStats};
pub use wire::{encode_command, parse_command, SeqFilter, DEFAULT_UDP_PORT, WIRE_VERSION};
