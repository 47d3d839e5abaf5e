use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure classes; the command-line front end maps these to exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input or configuration.
    Usage,
    /// A solver, factorisation or optimiser failed.
    Numerical,
    /// A required file is absent or unreadable.
    MissingArtifact,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid network: {0}")]
    Validation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("collapsed vessel: segment {segment}, node {node}, t = {time} s")]
    Collapsed { segment: u32, node: usize, time: f64 },

    #[error("supercritical flow: segment {segment}, node {node}, t = {time} s, |v|/c = {ratio:.4}")]
    Supercritical {
        segment: u32,
        node: usize,
        time: f64,
        ratio: f64,
    },

    #[error("{what} did not converge at t = {time} s (residual {residual:e})")]
    NonConvergence {
        what: String,
        time: f64,
        residual: f64,
    },

    #[error("{0}")]
    Numerical(String),

    #[error("kernel matrix is not numerically positive definite (condition estimate {condition:e})")]
    Indefinite { condition: f64 },

    #[error("kernel is not differentiable at this point: {0}")]
    NotDifferentiable(String),

    #[error("missing artifact: {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("{file}: {msg}")]
    Format { file: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse(_)
            | Error::Validation(_)
            | Error::Domain(_)
            | Error::InvalidInput(_)
            | Error::Dimension(_)
            | Error::Format { .. } => ErrorKind::Usage,
            Error::Collapsed { .. }
            | Error::Supercritical { .. }
            | Error::NonConvergence { .. }
            | Error::Numerical(_)
            | Error::Indefinite { .. }
            | Error::NotDifferentiable(_) => ErrorKind::Numerical,
            Error::MissingArtifact(_) | Error::Io(_) => ErrorKind::MissingArtifact,
        }
    }

    pub(crate) fn format(file: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Format {
            file: file.into(),
            msg: msg.into(),
        }
    }
}
