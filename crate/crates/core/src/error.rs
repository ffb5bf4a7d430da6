use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report. Each variant names the invariant
/// that was violated so the CLI can surface it verbatim.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid network: {0}")]
    Network(String),

    #[error("cycle: the parent relation contains a directed cycle through `{0}`")]
    Cycle(String),

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("invalid partition: {0}")]
    Partition(String),

    #[error("invalid module core: {0}")]
    ModuleCore(String),

    #[error("index {index} out of range for {len} modules")]
    ModuleIndex { index: usize, len: usize },

    #[error("invalid orientation: {0}")]
    Orientation(String),

    #[error("invalid decision for `{theta}`: {violation}")]
    Decision { theta: String, violation: String },

    #[error("inconsistent inputs: {0}")]
    Inconsistent(String),

    #[error("cap exceeded: {what} would be {actual}, cap is {cap}")]
    CapExceeded {
        what: &'static str,
        actual: u128,
        cap: u128,
    },

    #[error("network is not fully discrete: {0}")]
    NotDiscrete(String),

    #[error("missing evidence for data node `{0}`")]
    MissingEvidence(String),

    #[error("invalid evidence: {0}")]
    Evidence(String),

    #[error("zero normalizer: {0}")]
    ZeroNormalizer(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Wraps a serde_json error, keeping its line/column.
    pub(crate) fn from_json(err: serde_json::Error) -> Self {
        Error::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
