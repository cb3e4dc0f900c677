//! Configuration schema, file formats and the command drivers behind the
//! `pipenav` binary.

pub mod commands;
pub mod config;
pub mod profile_log;
pub mod run_record;

use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub use config::{Config, FilteringConfig};
pub use profile_log::{read_profile_log, write_profile_log, MalformedRow, ProfileLog, ProfileRecord};
pub use run_record::RunRecord;

/// Version written into every file this crate produces. Readers accept any
/// minor version of the same major.
pub const FORMAT_VERSION: &str = "1.0";
pub const FORMAT_MAJOR: u64 = 1;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "PIPENAV_CONFIG";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Io(String),
    #[error("acceptance threshold failed: {0}")]
    Threshold(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io(_) => 2,
            CliError::Threshold(_) => 3,
        }
    }

    pub(crate) fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io(format!("{}: {e}", path.display()))
    }

    pub(crate) fn violations(what: &str, v: &[(String, String)]) -> Self {
        let lines: Vec<String> = v.iter().map(|(k, m)| format!("  {k}: {m}")).collect();
        CliError::Validation(format!("invalid {what}:\n{}", lines.join("\n")))
    }
}

/// Rejects versions whose major differs from [`FORMAT_MAJOR`].
pub fn check_format_version(found: &str, what: &str) -> Result<(), CliError> {
    let major = found.trim().split('.').next().and_then(|m| m.parse::<u64>().ok());
    match major {
        Some(FORMAT_MAJOR) => Ok(()),
        Some(m) => Err(CliError::Validation(format!(
            "{what}: unsupported format_version {found} (major {m}, this build reads major {FORMAT_MAJOR})"
        ))),
        None => Err(CliError::Validation(format!("{what}: malformed format_version {found:?}"))),
    }
}

/// Writes to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}
