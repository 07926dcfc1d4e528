use crate::model::{ActionId, AgentId};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed task: {reason}{}", .action.map(|a| format!(" (action {a})")).unwrap_or_default())]
    MalformedTask {
        action: Option<ActionId>,
        reason: String,
    },

    #[error("action {0} is private and has no public projection")]
    PrivateAction(ActionId),

    #[error("action {action} is not applicable")]
    NotApplicable { action: ActionId },

    #[error("unsupported SAS+ version {0} (expected 3)")]
    UnsupportedVersion(String),

    #[error("unsupported feature at line {line}: {feature}")]
    UnsupportedFeature { line: usize, feature: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("schema error at {path}: {msg}")]
    Schema { path: String, msg: String },

    #[error("partition error: {0}")]
    Partition(String),

    #[error("invalid generator parameters: {0}")]
    Generator(String),

    #[error("protocol error from agent {agent}: {msg}")]
    Protocol { agent: AgentId, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn malformed(
        action: impl Into<Option<ActionId>>,
        reason: impl Into<String>,
    ) -> Self {
        Error::MalformedTask {
            action: action.into(),
            reason: reason.into(),
        }
    }
}
