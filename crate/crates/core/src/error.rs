use std::path::PathBuf;

use crate::ctdg::EventId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid target event {event_id}: {reason}")]
    InvalidTarget { event_id: EventId, reason: String },

    #[error("event {0} is not part of the graph")]
    UnknownEvent(EventId),

    #[error("oracle failed for target {target} excluding {excluded:?}: {message}")]
    Oracle {
        target: EventId,
        excluded: Vec<EventId>,
        message: String,
    },

    #[error("original prediction for target {0} is exactly 0; score normalization is undefined")]
    DegenerateInstance(EventId),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("cannot aggregate an empty group of records")]
    EmptyGroup,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bridge protocol error: {0}")]
    Bridge(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
