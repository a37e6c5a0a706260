use thiserror::Error;

/// Errors raised by trace handling, metrics, closed forms and simulators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("event {index} overlaps the previous event")]
    Overlap { index: usize },

    #[error("event {index} starts before the previous event")]
    Order { index: usize },

    #[error("unknown user `{0}`")]
    UnknownUser(String),

    #[error("invalid event {index}: {reason}")]
    InvalidEvent { index: usize, reason: String },

    #[error("invalid user label `{0}`")]
    InvalidUser(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("need at least {need} users, found {found}")]
    TooFewUsers { need: usize, found: usize },

    #[error("operation is defined for exactly two users, found {0}")]
    NotTwoUsers(usize),

    #[error("degenerate parameters: {0}")]
    Degenerate(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no root of the collision fixed point in (0, 0.5) for cw_min={cw_min}, beta={beta}")]
    NoRoot { cw_min: u32, beta: u32 },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
