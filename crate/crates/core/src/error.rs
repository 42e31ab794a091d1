use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid weight vector: {0}")]
    InvalidWeights(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("structure has no solid voxels")]
    EmptyStructure,

    #[error("invalid curve: {0}")]
    Curve(String),

    #[error("training diverged for member seed {seed} at epoch {epoch}: non-finite loss")]
    TrainingDiverged { seed: u64, epoch: usize },

    #[error("unknown design id `{0}`")]
    UnknownDesign(String),

    #[error("malformed file {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error("unsupported schema version {found} (this build reads up to {supported})")]
    SchemaVersion { found: u32, supported: u32 },

    #[error("campaign error: {0}")]
    Campaign(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error on {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
