//! Session orchestration and the live event service.
//!
//! One [`engine::Engine`] owns the session: it paces the EMG source, runs the
//! decoder, drives the robot and publishes events through the [`hub::Hub`].
//! [`server`] exposes it over WebSocket (`/ws`) and HTTP (`/state`).

pub mod engine;
pub mod hub;
pub mod protocol;
pub mod robot_link;
pub mod server;
pub mod source;

pub use engine::{Engine, EngineMsg, GatewayConfig, StateSnapshot};
pub use hub::{ClientStream, Hub, Outgoing, Subscription, CLIENT_BUFFER};
pub use protocol::{
    parse_client_command, ClientCommand, CuePhase, ErrorCode, EventBody, EventMessage, Phase, SessionState,
    SourceDescriptor, COMMAND_TYPES,
};
pub use server::{Gateway, GatewayError, DEFAULT_GATEWAY_PORT};
