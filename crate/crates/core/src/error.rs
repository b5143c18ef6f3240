use thiserror::Error;

/// Errors raised by constructions and verifications.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid metric: {0}")]
    InvalidMetric(String),
    #[error("graph is disconnected: no path between points {0} and {1}")]
    Disconnected(usize, usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("witness does not match space: {0}")]
    PointMismatch(String),
    #[error("unsupported conversion {from} -> {to}")]
    UnsupportedConversion { from: String, to: String },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("cover has Lebesgue number 0: no cover set contains a ball around point {0}")]
    ZeroLebesgue(usize),
    #[error("schedule violation: {0}")]
    Schedule(String),
    #[error("kernel classification failed: {0}")]
    Classification(String),
    #[error("group error: {0}")]
    Group(String),
    #[error("linear program failure: {0}")]
    Lp(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("schema error at {path}: {msg}")]
    Schema { path: String, msg: String },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn schema(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            msg: msg.into(),
        }
    }
}
