use std::fmt;
use std::path::Path;

use aec_core::AecError;

use crate::wav::WavError;

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Data = 2,
    Numeric = 3,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            kind: ExitKind::Data,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.kind as i32
    }

    /// Prefixes the message with the file it concerns.
    pub fn in_file(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<AecError> for CliError {
    fn from(e: AecError) -> Self {
        let kind = match e {
            AecError::Config(_) => ExitKind::Usage,
            AecError::Structural(_) | AecError::DegenerateInput(_) => ExitKind::Data,
            AecError::Numeric(_) | AecError::Solver { .. } | AecError::DegenerateFilter { .. } => ExitKind::Numeric,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<WavError> for CliError {
    fn from(e: WavError) -> Self {
        Self::data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
