use std::fmt;
use std::process::ExitCode;

use overlap_harness::HarnessError;

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config or input: exit 2.
    Usage(anyhow::Error),
    /// The computation itself broke down: exit 3.
    Aborted(anyhow::Error),
}

impl Failure {
    pub fn usage(e: impl Into<anyhow::Error>) -> Self {
        Failure::Usage(e.into())
    }

    pub fn aborted(e: impl Into<anyhow::Error>) -> Self {
        Failure::Aborted(e.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Usage(_) => ExitCode::from(2),
            Failure::Aborted(_) => ExitCode::from(3),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(e) => write!(f, "{e:#}"),
            Failure::Aborted(e) => write!(f, "aborted: {e:#}"),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::Synth(_) | HarnessError::Json(_) | HarnessError::Io(_) => {
                Failure::usage(e)
            }
            _ => Failure::aborted(e),
        }
    }
}

pub type CmdResult<T> = std::result::Result<T, Failure>;
