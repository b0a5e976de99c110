use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: String, actual: String },

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("waveform design infeasible: {requested} sequences requested but at most floor(M/|support|) = floor({m}/{support}) = {bound} fit")]
    Infeasible {
        requested: usize,
        m: usize,
        support: usize,
        bound: usize,
    },

    #[error("null space exhausted while designing sequence {index}: constraint rank {rank} of {m}")]
    Rank { index: usize, rank: usize, m: usize },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("allocation violates constraints: {0}")]
    Constraint(String),

    #[error("entropy undefined for an all-zero image")]
    UndefinedEntropy,

    #[error("combinatorial budget exceeded: {candidates} candidates > {budget}")]
    Budget { candidates: u64, budget: u64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn dims(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Dimension {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
