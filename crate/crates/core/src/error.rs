use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not positive definite (non-positive pivot at index {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("singular value decomposition failed to converge")]
    ConvergenceFailure,

    #[error(
        "DC iteration stopped after {iterations} steps with stationarity residual {residual:e}"
    )]
    MaxInnerIterationsExceeded { iterations: usize, residual: f64 },

    #[error("non-finite value in {block} at outer iteration {iteration}")]
    NonFinite { block: &'static str, iteration: usize },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("duplicate entry at line {line}: user {user}, item {item}")]
    DuplicateEntry {
        line: usize,
        user: String,
        item: String,
    },

    #[error("dataset contains no entries")]
    EmptyDataset,

    #[error("user {user} has a held-out item but no ranked list")]
    MissingList { user: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the numerical routines rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPositiveDefinite { .. }
                | Error::ConvergenceFailure
                | Error::MaxInnerIterationsExceeded { .. }
                | Error::NonFinite { .. }
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
