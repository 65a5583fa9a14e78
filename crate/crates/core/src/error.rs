use std::path::PathBuf;

use thiserror::Error;

use crate::lmm::LmmFit;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A caller broke a documented precondition (e.g. passed a non-symmetric matrix).
    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("matrix `{0}` is singular (factorization failed after jitter)")]
    Singular(String),

    #[error("matrix is not positive semi-definite (smallest eigenvalue {min_eigenvalue:e}, largest {max_eigenvalue:e})")]
    NotPsd {
        min_eigenvalue: f64,
        max_eigenvalue: f64,
    },

    #[error("polynomial degree {0} is not supported (maximum 10)")]
    UnsupportedDegree(usize),

    #[error("invalid knots: {0}")]
    InvalidKnots(String),

    #[error("optimizer failed to converge from every starting point (best negative log-likelihood {:.6})", best.neg_loglik())]
    NonConvergence { best: Box<LmmFit> },

    #[error("autocorrelation is undefined for constant residuals")]
    UndefinedAcf,

    #[error("usage error: {0}")]
    Usage(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("JSON error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_)
            | Error::InvalidInput(_)
            | Error::UnsupportedDegree(_)
            | Error::InvalidKnots(_)
            | Error::ContractViolation(_) => 2,
            Error::Singular(_)
            | Error::NotPsd { .. }
            | Error::NonConvergence { .. }
            | Error::UndefinedAcf => 3,
            Error::Io { .. } | Error::Csv { .. } | Error::Json { .. } => 4,
        }
    }
}
