use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Engine(#[from] smforge_core::Error),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("output directory {0} exists and is not empty")]
    OutDirNotEmpty(PathBuf),

    #[error("artifact {dir} is missing {missing:?}")]
    MissingArtifact { dir: PathBuf, missing: Vec<String> },

    #[error("artifact file {path} is malformed: {reason}")]
    BadArtifact { path: PathBuf, reason: String },
}

impl CliError {
    /// Process exit status: 2 for configuration and usage problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::OutDirNotEmpty(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
