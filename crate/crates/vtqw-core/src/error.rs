use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid network: {0}")]
    InvalidNetwork(String),
    #[error("graph is disconnected")]
    Disconnected,
    #[error("vertex {0} is isolated")]
    IsolatedVertex(usize),
    #[error("infeasible demand: {0}")]
    Infeasible(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("Hilbert-space dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("horizon {horizon} exceeds the cap of {cap}")]
    HorizonCap { horizon: usize, cap: usize },
    #[error("invalid subroutine: {0}")]
    InvalidSubroutine(String),
    #[error("invalid weight sequence: {0}")]
    InvalidWeights(String),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("witness rejected: {0}")]
    Witness(String),
    #[error("promise violated: {0}")]
    Promise(String),
    #[error("invalid outer algorithm: {0}")]
    InvalidOuter(String),
}

pub type Result<T> = std::result::Result<T, Error>;
