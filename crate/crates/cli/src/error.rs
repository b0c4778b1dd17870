//! Failure classification behind the exit-code contract: 1 for a bad
//! invocation or config file, 2 for a model or data failure on a valid
//! invocation.

use std::fmt;

use nanofiber_core::CoreError;

#[derive(Debug)]
pub enum Failure {
    /// Wrong flags, malformed config, unusable paths. Exit code 1.
    Usage(String),
    /// The computation itself failed or was rejected: bad stream content,
    /// fit non-convergence, an adiabaticity test that does not pass.
    /// Exit code 2.
    Domain(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Domain(_) => 2,
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Failure::Usage(message.into())
    }

    pub fn domain(message: impl Into<String>) -> Self {
        Failure::Domain(message.into())
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(message) | Failure::Domain(message) => f.write_str(message),
        }
    }
}

impl From<CoreError> for Failure {
    fn from(err: CoreError) -> Self {
        Failure::Domain(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Failure>;
