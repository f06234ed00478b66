use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    /// Non-positive pivot during SPD factorization; the covariance is singular
    /// (typically p <= N) or numerically degenerate.
    #[error("matrix is singular: pivot {pivot} is not positive (value {value:e})")]
    Singular { pivot: usize, value: f64 },

    #[error("eigensolver did not converge after {sweeps} implicit-shift sweeps")]
    Convergence { sweeps: usize },

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("invalid configuration for `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("aborting: {skipped} singular samples at alpha = {alpha} (N = {n_assets})")]
    UnexpectedSingular {
        alpha: f64,
        n_assets: usize,
        skipped: usize,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. } | Error::Convergence { .. } | Error::UnexpectedSingular { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
