use thiserror::Error;

/// Failure categories map onto distinct process exit codes in the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Physics,
    Numerics,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("relative energy is zero (v1 == v2), no scattering channel exists")]
    ZeroRelativeMotion,

    #[error("boundary-matching system is numerically singular (condition number {condition:.3e})")]
    SingularMatch { condition: f64 },

    #[error("invalid mode index {0}: modes start at 1")]
    InvalidMode(i64),

    #[error("finite-difference step too coarse: stencil estimates disagree by {disagreement:.3e}")]
    StepTooCoarse { disagreement: f64 },

    #[error("only {found} fringe maxima found in window, at least 3 are needed")]
    TooFewFringes { found: usize },

    #[error("velocity spread must be positive")]
    DivisionByZeroWidth,

    #[error("{source_name}:{line}:{column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Parse { .. } | Error::Validation { .. } => ErrorCategory::Config,
            Error::InvalidParameter { .. }
            | Error::ZeroRelativeMotion
            | Error::SingularMatch { .. }
            | Error::InvalidMode(_) => ErrorCategory::Physics,
            Error::StepTooCoarse { .. } | Error::TooFewFringes { .. } | Error::DivisionByZeroWidth => {
                ErrorCategory::Numerics
            }
            Error::Io { .. } => ErrorCategory::Io,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
