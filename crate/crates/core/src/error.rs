use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid spectral profile: {0}")]
    InvalidProfile(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("index error on line {line}: {msg}")]
    Index { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
    #[error("matrix is rank deficient (smallest singular value {sigma_min:e} below cutoff {cutoff:e})")]
    RankDeficient { sigma_min: f64, cutoff: f64 },
    #[error("sketch family `less` requires a sampling distribution")]
    MissingSamplingDistribution,
    #[error("invalid sketch specification: {0}")]
    InvalidSketch(String),
    #[error("run {run} recorded {recorded} iterations, need at least 2")]
    InsufficientIterations { run: usize, recorded: usize },
    #[error("component {0} is numerically zero for every iteration")]
    DegenerateComponent(usize),
    #[error("sketched matrix has rank 0")]
    DegenerateSketch,
    #[error("parameter p = {p} outside the admissible range [2, {max}]")]
    InvalidP { p: usize, max: i64 },
    #[error("k = {k} out of range: {msg}")]
    KOutOfRange { k: usize, msg: String },
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
