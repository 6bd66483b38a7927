use std::path::{Path, PathBuf};

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{0}")]
    Corpus(String),
    #[error("missing artifact {0} (run the earlier stage first)")]
    MissingArtifact(PathBuf),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error(transparent)]
    Core(blindseg_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.to_path_buf(), source }
    }

    pub fn format(path: &Path, message: impl Into<String>) -> Self {
        Self::Format { path: path.to_path_buf(), message: message.into() }
    }

    pub fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        Self::Parse { path: path.to_path_buf(), line, message: message.into() }
    }

    /// Process exit status: 2 config, 3 input/output and data, 4 numerical
    /// divergence, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Io { .. }
            | Self::Format { .. }
            | Self::Parse { .. }
            | Self::Corpus(_)
            | Self::MissingArtifact(_) => 3,
            Self::Divergence(_) => 4,
            Self::Core(e) => match e {
                blindseg_core::Error::InvalidConfig(_) => 2,
                blindseg_core::Error::Divergence(_) => 4,
                _ => 1,
            },
        }
    }
}

impl From<blindseg_core::Error> for CliError {
    fn from(e: blindseg_core::Error) -> Self {
        match e {
            blindseg_core::Error::Divergence(m) => Self::Divergence(m),
            other => Self::Core(other),
        }
    }
}
