use std::fmt;

use firkit_core::Error;

/// Failure of a CLI invocation, with its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, unreadable files or an invalid configuration.
    Config(String),
    /// Raised by the estimators or the simulator.
    Core(Error),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// 2 for configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                Error::Singular { .. }
                | Error::NotObservable { .. }
                | Error::Unsupported { .. } => 3,
                Error::Model(_) | Error::InvalidArgument(_) | Error::UnknownFilter(_) => 2,
            },
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(e) => e.code(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => f.write_str(msg),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}
