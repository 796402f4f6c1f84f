use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// Two particles sit at exactly the same position; the pair direction is undefined.
    #[error("particles {i} and {j} coincide")]
    DegeneratePair { i: usize, j: usize },

    #[error("box length {box_len} is smaller than 2 x (cutoff + skin) = {required}")]
    BoxTooSmall { box_len: f64, required: f64 },

    #[error("neighbor list is stale: max displacement {displacement} >= skin/2 = {limit}")]
    StaleNeighborList { displacement: f64, limit: f64 },

    #[error("configurational temperature undefined: {0}")]
    UndefinedEstimate(String),

    #[error("numerical instability at step {step}")]
    Unstable { step: u64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("critical stepsize search failed: {0}")]
    SearchFailed(String),

    #[error("incomplete efficiency table: {0}")]
    IncompleteTable(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
