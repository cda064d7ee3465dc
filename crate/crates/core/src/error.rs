use thiserror::Error;

/// Errors raised by the lattice mechanism library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix has rank {found}, expected full row rank {expected}")]
    RankDeficient { expected: usize, found: usize },

    #[error("constraints fix every coordinate; the noise lattice is {{0}}")]
    EmptyLattice,

    #[error("matrix is not unimodular (|det| = {det})")]
    NotUnimodular { det: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid constraint set: {0}")]
    InvalidConstraint(String),

    #[error("histogram entry {index} is negative ({value})")]
    NegativeCount { index: usize, value: i64 },

    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("matrix entry does not fit in a 64-bit integer")]
    EntryOverflow,

    #[error("released histogram does not reproduce the invariants")]
    InvariantViolated,

    #[error("coupled chains did not meet within {cap} iterations")]
    MeetingTimeout { cap: u64 },

    #[error("maximal coupling rejection loop exceeded {cap} attempts on coordinate {coordinate}")]
    RejectionCap { coordinate: usize, cap: u64 },

    #[error("at least two chains of equal, non-zero length are required")]
    InsufficientChains,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
