use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("state {state:?} lies outside the domain")]
    DomainError { state: Vec<f64> },

    #[error("vector field returned a non-finite value at {state:?}")]
    NonFiniteField { state: Vec<f64> },

    #[error("trajectory left the enclosure region at t = {time} (state {state:?})")]
    LeftEnclosure { time: f64, state: Vec<f64> },

    #[error("negative radicand {value} in deviation bound (lambda = {lambda}, t = {t})")]
    NegativeRadicand { value: f64, lambda: f64, t: f64 },

    #[error("region is empty or degenerate")]
    EmptyRegion,

    #[error("zone growth exceeded after {retries} enlargements at step {step} (radius {radius})")]
    ZoneGrowthExceeded {
        step: usize,
        retries: usize,
        radius: f64,
    },

    #[error("time {t} is not on the tube lattice")]
    OffLattice { t: f64 },

    #[error("tube has {samples} samples, need at least {needed}")]
    TubeTooShort { samples: usize, needed: usize },

    #[error("certificate status is NotFound")]
    NotCertified,

    #[error("trace is not sampled on the tube lattice: {0}")]
    LatticeMismatch(String),

    #[error("trace has {samples} samples, need at least {needed}")]
    TooShort { samples: usize, needed: usize },

    #[error("no feasible pattern from node {node}")]
    InfeasibleNode { node: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("format error: {0}")]
    Format(String),

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
        Error::Format(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
