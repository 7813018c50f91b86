use std::path::PathBuf;

use thiserror::Error;

use crate::nn::ModelState;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid geometry for station {station_id}: {reason}")]
    Geometry { station_id: String, reason: String },

    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("feature `{0}` has no non-missing values in the fitting period")]
    EmptyFeature(String),

    #[error("unknown variable `{0}`")]
    UnknownVariable(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("parse error in {path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    /// Training produced a non-finite loss, gradient or parameter. Carries
    /// the last state in which everything was finite.
    #[error("training diverged in {stage}: {reason}")]
    Diverged {
        stage: String,
        reason: String,
        last_finite: LastFinite,
    },

    #[error("stage `{stage}` failed: {reason}")]
    Stage { stage: String, reason: String },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than a failing stage.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Geometry { .. }
                | Error::Shape { .. }
                | Error::EmptyFeature(_)
                | Error::UnknownVariable(_)
                | Error::Parse { .. }
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}

/// Boxed checkpoint attached to a divergence error.
pub struct LastFinite(pub Box<ModelState>);

impl std::fmt::Debug for LastFinite {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LastFinite(step {}, {} params)", self.0.adam.step, self.0.params.len())
    }
}
