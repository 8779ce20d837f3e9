use std::path::PathBuf;

use crate::growth::GrowthTrace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not numerically positive-definite (Cholesky failed)")]
    NotPositiveDefinite,

    #[error("diagonal entry {index} is not positive ({value})")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    #[error("singular 2x2 block at ({i}, {j})")]
    SingularBlock { i: usize, j: usize },

    #[error("iterate has edge ({i}, {j}) outside the descent support")]
    SupportViolation { i: usize, j: usize },

    #[error("invalid index pair ({i}, {j}) for dimension {dim}")]
    InvalidIndex { i: usize, j: usize, dim: usize },

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("eigendecomposition failed")]
    EigenFailure,

    #[error("growth aborted after {} step(s): {source}", partial.steps.len())]
    GrowthAborted {
        partial: Box<GrowthTrace>,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed input in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for failures caused by the numerics rather than by inputs or I/O.
    pub fn is_compute(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite
                | Error::NonPositiveDiagonal { .. }
                | Error::Degenerate(_)
                | Error::SingularBlock { .. }
                | Error::EigenFailure
                | Error::GrowthAborted { .. }
        )
    }

    /// True for file-system failures and malformed input files.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_) | Error::Parse { .. } | Error::Json(_))
    }
}
