use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e}, tolerance {tolerance:e})")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive semi-definite (min eigenvalue {min_eigenvalue:e}, tolerance {tolerance:e})")]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },

    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    #[error("solver did not converge: {0}")]
    NonConvergence(String),

    #[error("{0}")]
    Internal(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input: {0}")]
    Format(String),
}

impl Error {
    /// Errors caused by bad user input, as opposed to solver or internal failures.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidDataset(_)
                | Error::InvalidConfig(_)
                | Error::DimensionMismatch(_)
                | Error::NotSymmetric { .. }
                | Error::NotPsd { .. }
                | Error::RankDeficient(_)
                | Error::Io { .. }
                | Error::Format(_)
        )
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Format(e.to_string())
    }
}
