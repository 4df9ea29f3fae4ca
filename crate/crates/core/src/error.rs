use thiserror::Error;

use crate::model::{AgentId, TaskCategory};

pub type Result<T, E = TrustError> = std::result::Result<T, E>;

/// Errors raised by environment construction and trust evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrustError {
    #[error("interaction #{index} rejected: {reason}")]
    InvalidInteraction { index: usize, reason: String },

    #[error("unknown agent `{0}`")]
    UnknownAgent(AgentId),

    #[error("trustor and trustee must differ (got `{0}`)")]
    SelfEvaluation(AgentId),

    #[error("agent `{agent}` lacks capability for category `{category}`")]
    MissingCapability {
        agent: AgentId,
        category: TaskCategory,
    },

    #[error("propagation probabilities need at least one trusted neighbour")]
    EmptyNeighbourSet,

    #[error("reputation node set is empty")]
    EmptyReputationSet,

    #[error("query time {query} does not match environment snapshot time {snapshot}")]
    SnapshotTimeMismatch { query: f64, snapshot: f64 },

    #[error("oracle size guard exceeded: {actual} > {limit}")]
    SizeGuard { actual: usize, limit: usize },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
