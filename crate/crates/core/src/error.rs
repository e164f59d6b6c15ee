use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid basis parameters: n = {n}, k = {k} ({reason})")]
    InvalidBasis { n: usize, k: usize, reason: &'static str },

    #[error("subspace dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("states live on different bases")]
    BasisMismatch,

    #[error("invalid qubit pair ({i}, {j}) for n = {n}")]
    InvalidPair { i: usize, j: usize, n: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("eigensolver did not converge within {0} iterations")]
    NoConvergence(usize),

    #[error("eigenphase within {tol:e} of the branch cut (phase {phase})")]
    BranchAmbiguity { phase: f64, tol: f64 },

    #[error("multi-chain Trotter mixer requires a chain decomposition")]
    MissingChains,

    #[error("optimization failed on every start")]
    AllStartsFailed,

    #[error("zero state vector")]
    ZeroState,

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
