use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] smectic_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("mesh: {0}")]
    Mesh(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("cache: {0}")]
    Cache(String),
}
