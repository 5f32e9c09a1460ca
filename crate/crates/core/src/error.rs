use thiserror::Error;

pub type Result<T> = std::result::Result<T, MonolabError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MonolabError {
    #[error("invalid system shape: {0}")]
    InvalidShape(String),

    #[error("size mismatch: expected {expected}, got {got}")]
    SizeMismatch { expected: usize, got: usize },

    #[error("invalid subsystem index set: {0}")]
    InvalidIndex(String),

    #[error("matrix is not Hermitian (residual {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("invalid trace {0}")]
    InvalidTrace(f64),

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("state is not pure (purity {0})")]
    NotPure(f64),

    #[error("outcome probability {0:.3e} is below the floor")]
    ProbabilityUnderflow(f64),

    #[error("measurement operators violate completeness (residual {0:.3e})")]
    Completeness(f64),

    #[error("walk lattice too large: {nodes} nodes exceeds limit {limit}")]
    TreeTooLarge { nodes: usize, limit: usize },

    #[error("walk not absorbed after {0} steps")]
    Unabsorbed(usize),

    #[error("permutation arity mismatch: {0}")]
    Arity(String),

    #[error("imaginary residue {0:.3e} exceeds tolerance")]
    ImaginaryResidue(f64),

    #[error("argument outside the function domain: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown monotone '{0}'")]
    UnknownMonotone(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for MonolabError {
    fn from(e: std::io::Error) -> Self {
        MonolabError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for MonolabError {
    fn from(e: serde_json::Error) -> Self {
        MonolabError::Parse(e.to_string())
    }
}

impl From<csv::Error> for MonolabError {
    fn from(e: csv::Error) -> Self {
        MonolabError::Io(e.to_string())
    }
}
