use thiserror::Error;

#[derive(Debug, Error)]
pub enum RobotError {
    #[error("malformed datagram: {0}")]
    Malformed(String),

    #[error("unsupported version {0}")]
    UnsupportedVersion(u64),

    #[error("unknown joint '{0}'")]
    UnknownJoint(String),

    #[error("unknown command kind '{0}'")]
    UnknownKind(String),

    #[error("unknown mode '{0}'")]
    UnknownMode(String),

    #[error("joint {joint} takes {expected} commands, got {actual}")]
    KindMismatch {
        joint: &'static str,
        expected: &'static str,
        actual: &'static str,
    },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, RobotError>;
