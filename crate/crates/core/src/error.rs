use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A scenario or parameter violates a named invariant.
    #[error("invalid configuration: {invariant}: {message}")]
    Invalid { invariant: &'static str, message: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("linear solver failure: {0}")]
    Singular(String),

    #[error("expression error at column {column}: {message}")]
    Expression { column: usize, message: String },

    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("step {step} failed: {message} (residual history: {residuals:?})")]
    StepFailed {
        step: usize,
        message: String,
        residuals: Vec<f64>,
    },

    /// The state left the admissible set u + g > gamma.
    #[error("penetration bound violated at step {step}: min(u+g) = {min_gap} <= gamma = {gamma}; raise k")]
    Penetration { step: usize, min_gap: f64, gamma: f64 },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(invariant: &'static str, message: impl Into<String>) -> Self {
        Error::Invalid {
            invariant,
            message: message.into(),
        }
    }

    /// Short machine-readable tag used by the command-line error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Invalid { .. } => "invalid",
            Error::GridMismatch(_) => "grid_mismatch",
            Error::Singular(_) => "singular",
            Error::Expression { .. } => "expression",
            Error::Parse { .. } => "parse",
            Error::StepFailed { .. } => "step_failed",
            Error::Penetration { .. } => "penetration",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
