use std::path::PathBuf;

/// Errors raised across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shapes, lengths or values of caller-supplied data are unusable.
    #[error("input error: {0}")]
    Input(String),

    /// A hyperparameter or option is out of range.
    #[error("config error: {0}")]
    Config(String),

    /// The kernel family has no sampler for the requested scheme.
    #[error("unsupported kernel family: {0}")]
    UnsupportedFamily(String),

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    /// A linear system is singular or too ill-conditioned to solve reliably.
    #[error("singular system: {0}")]
    Singular(String),

    /// Sampling weights cannot form a probability distribution.
    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Short machine-readable tag for the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Input(_) => "input",
            Error::Config(_) => "config",
            Error::UnsupportedFamily(_) => "unsupported-family",
            Error::UnsupportedDimension(_) => "unsupported-dimension",
            Error::Singular(_) => "singular",
            Error::Degenerate(_) => "degenerate",
            Error::Parse { .. } => "parse",
            Error::Format(_) => "format",
            Error::Io { .. } => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
