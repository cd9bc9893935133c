use std::fmt;

/// Errors mapped to process exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Bad input or configuration; exit code 2.
    Config(String),
    /// The computation failed; exit code 3.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<celldiv::Error> for CliError {
    fn from(e: celldiv::Error) -> Self {
        if e.is_config() || matches!(e, celldiv::Error::Io(_)) {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}
