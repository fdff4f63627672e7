//! Failure taxonomy for the command line: validation problems exit with 2,
//! numeric failures (non-convergence) with 3, and both emit a
//! machine-readable diagnostic document.

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    Validation,
    Numeric,
}

/// A failed run, carrying everything the diagnostic document reports.
#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    /// Config file or input file the failure refers to, when one exists.
    pub path: String,
    /// Field or flag the failure refers to, when one exists.
    pub field: String,
    pub message: String,
}

impl CliError {
    pub fn validation(path: impl Into<String>, field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Validation,
            path: path.into(),
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn numeric(message: impl Into<String>) -> Self {
        CliError {
            kind: ErrorKind::Numeric,
            path: String::new(),
            field: String::new(),
            message: message.into(),
        }
    }

    /// Maps solver errors onto the exit-code taxonomy: convergence failures
    /// are numeric, everything else is a problem statement the user can fix.
    pub fn from_solver(err: representer::Error, path: &str, field: &str) -> Self {
        use representer::Error;
        match err {
            Error::NonConvergence { .. } | Error::OracleLimit { .. } | Error::DegeneratePruning { .. } => {
                CliError::numeric(err.to_string())
            }
            other => CliError::validation(path, field, other.to_string()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation => 2,
            ErrorKind::Numeric => 3,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
