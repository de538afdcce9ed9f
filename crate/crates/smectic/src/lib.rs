//! File formats, result cache, parallel table builders and the `smectic`
//! command line on top of `smectic-core`.

pub mod cache;
pub mod cli;
pub mod compute;
pub mod config;
pub mod error;
pub mod fields;
pub mod meshio;
pub mod tables;

use std::io::Write;
use std::path::Path;

pub use error::{Error, Result};

/// Write `bytes` to `path` through a temporary file in the same directory
/// and a rename, creating parent directories as needed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(parent)?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
