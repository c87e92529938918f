use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("random block exhausted: requested iterations {start}..{end} of {available}")]
    BlockExhausted {
        start: usize,
        end: usize,
        available: usize,
    },

    #[error("jump direction has zero norm")]
    ZeroDirection,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("chains did not coalesce within {cap} steps")]
    NotCoalesced { cap: usize },

    #[error("set {set_index}, row {row}: pair still apart after {blocks} extra blocks")]
    TailUnresolved {
        set_index: u64,
        row: usize,
        blocks: usize,
    },

    #[error("kernel does not support {0}")]
    Unsupported(&'static str),

    #[error("empty input")]
    EmptyInput,

    #[error("statistic undefined: {0}")]
    Undefined(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
