use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("{routine} did not converge within {iterations} iterations")]
    NoConvergence {
        routine: &'static str,
        iterations: usize,
    },

    #[error("degenerate rank: {0}")]
    DegenerateRank(String),

    #[error("requested rank {requested} exceeds available rank {available}")]
    RankTooLarge { requested: usize, available: usize },

    #[error("{0}")]
    Range(String),

    #[error("{0}")]
    Embedding(String),

    #[error("{0}")]
    Argument(String),

    #[error("{0}")]
    Mismatch(String),

    #[error("{0}")]
    Coverage(String),

    #[error("{}", .0.join("; "))]
    Validation(Vec<String>),

    #[error("GEH is undefined when both volumes are zero")]
    UndefinedGeh,

    #[error("{0} has zero variance")]
    ZeroVariance(&'static str),

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable short identifier, used in CLI error lines and sweep rows.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonFinite { .. } => "non_finite",
            Error::NoConvergence { .. } => "no_convergence",
            Error::DegenerateRank(_) => "degenerate_rank",
            Error::RankTooLarge { .. } => "rank_too_large",
            Error::Range(_) => "range",
            Error::Embedding(_) => "embedding",
            Error::Argument(_) => "argument",
            Error::Mismatch(_) => "mismatch",
            Error::Coverage(_) => "coverage",
            Error::Validation(_) => "validation",
            Error::UndefinedGeh => "undefined_geh",
            Error::ZeroVariance(_) => "zero_variance",
            Error::Parse { .. } => "parse",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
