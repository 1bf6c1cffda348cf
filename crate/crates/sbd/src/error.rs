use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum SbdError {
    #[error("config error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("model error: {0}")]
    Model(#[from] sbd_core::Error),

    #[error("dense reference: {0}")]
    Oracle(#[from] crate::oracle::OracleError),
}

impl SbdError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        Self::Io { path: path.as_ref().to_path_buf(), source }
    }

    pub fn format(path: impl AsRef<Path>, msg: impl Into<String>) -> Self {
        Self::Format { path: path.as_ref().to_path_buf(), msg: msg.into() }
    }

    /// Process exit code: 2 configuration, 3 input/output, 4 model.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io { .. } | Self::Format { .. } => 3,
            Self::Model(_) | Self::Oracle(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, SbdError>;
