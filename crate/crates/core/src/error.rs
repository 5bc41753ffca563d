use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed dataset: {0}")]
    Parse(String),

    #[error("graph validation failed: {0}")]
    Validation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numerical failure in {component}{}", epoch.map(|e| format!(" at epoch {e}")).unwrap_or_default())]
    Numerical {
        component: String,
        epoch: Option<usize>,
    },

    #[error("degenerate coefficients: self-expression matrix has no off-diagonal mass")]
    DegenerateCoefficients,

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn numerical(component: impl Into<String>) -> Self {
        Error::Numerical {
            component: component.into(),
            epoch: None,
        }
    }

    /// Tags a numerical failure with the epoch it happened in.
    pub fn at_epoch(self, epoch: usize) -> Self {
        match self {
            Error::Numerical {
                component,
                epoch: None,
            } => Error::Numerical {
                component,
                epoch: Some(epoch),
            },
            other => other,
        }
    }

    /// True for failures a CLI should report as numerical (exit code 3).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical { .. } | Error::Eigen(_) | Error::DegenerateCoefficients
        )
    }
}
