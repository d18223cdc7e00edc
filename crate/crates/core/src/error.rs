use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    Shape {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("forward cache does not belong to this network state")]
    StaleCache,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("environment step failed at episode {episode}, t={t}: {source}")]
    EnvStep {
        episode: usize,
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(
        "training diverged at iteration {iteration}: mean |logit| {mean_abs_logit:.3e} exceeds {bound:.3e}"
    )]
    Diverged {
        iteration: usize,
        mean_abs_logit: f64,
        bound: f64,
    },

    #[error("parse error in {what}: {message}")]
    Parse { what: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn parse(what: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Error::Parse {
            what: what.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
