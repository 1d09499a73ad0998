use crate::configfile::ConfigFileError;
use crate::tracefile::TraceFileError;
use cryosim_core::sim::SimError;
use std::io;
use std::path::Path;

/// Process exit codes.
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_FAULT: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigFileError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    TraceFile(#[from] TraceFileError),
    #[error("{path}: {msg}")]
    BadInput { path: String, msg: String },
    #[error("simulation failed: {0}")]
    Sim(#[from] SimError),
    #[error("{failed} of {total} sweep cells failed")]
    SweepFailed { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => EXIT_USAGE,
            CliError::Io { .. } | CliError::TraceFile(_) | CliError::BadInput { .. } => EXIT_IO,
            CliError::Sim(SimError::Config(_) | SimError::TraceCount { .. }) => EXIT_USAGE,
            CliError::Sim(_) => EXIT_FAULT,
            CliError::SweepFailed { .. } => EXIT_FAULT,
        }
    }

    pub fn io(path: &Path, source: io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}
