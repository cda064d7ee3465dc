use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}:{line}: negative population {value} for county {county}")]
    NegativePopulation {
        path: PathBuf,
        line: usize,
        county: String,
        value: i64,
    },

    #[error("{context}: {source}")]
    Library {
        context: String,
        #[source]
        source: lattice_dp::Error,
    },

    #[error("{failed} of {total} coupled replicates hit the meeting-time cap; partial results were written")]
    PartialTimeout { failed: usize, total: usize },
}

impl CliError {
    /// 0 success, 2 config/parse, 3 numeric/rank, 4 diagnostics timeout.
    pub fn exit_code(&self) -> i32 {
        use lattice_dp::Error as E;
        match self {
            CliError::Parse { .. }
            | CliError::File { .. }
            | CliError::Config(_)
            | CliError::NegativePopulation { .. } => 2,
            CliError::PartialTimeout { .. } => 4,
            CliError::Library { source, .. } => match source {
                E::MeetingTimeout { .. } => 4,
                E::RankDeficient { .. }
                | E::EmptyLattice
                | E::NotUnimodular { .. }
                | E::EntryOverflow
                | E::InvariantViolated
                | E::RejectionCap { .. }
                | E::InsufficientChains => 3,
                E::DimensionMismatch { .. }
                | E::InvalidConstraint(_)
                | E::NegativeCount { .. }
                | E::ParameterDomain(_)
                | E::ConfigInvalid(_)
                | E::Io(_)
                | E::Csv(_)
                | E::Json(_) => 2,
            },
        }
    }
}

pub trait Context<T> {
    fn context(self, what: impl Into<String>) -> Result<T, CliError>;
}

impl<T> Context<T> for Result<T, lattice_dp::Error> {
    fn context(self, what: impl Into<String>) -> Result<T, CliError> {
        self.map_err(|source| CliError::Library {
            context: what.into(),
            source,
        })
    }
}

pub fn file_error(path: &std::path::Path, e: impl std::fmt::Display) -> CliError {
    CliError::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}
