use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("Mathieu solver did not converge for nu={nu}, q={q} (truncation cap {cap})")]
    Convergence { nu: f64, q: f64, cap: usize },

    #[error("expansion not valid here: {0}")]
    Expansion(String),

    #[error("formula singular: {0}")]
    Singular(String),

    #[error("parameters outside the regime of the formula: {0}")]
    Regime(String),

    #[error("super-revival time unbounded (q0 = 0)")]
    UnboundedSuperRevival,

    #[error("orbit is not librating (energy {energy} at or above separatrix {separatrix})")]
    NotLibrating { energy: f64, separatrix: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("time step too large: {0}")]
    StepTooLarge(String),

    #[error("grid too small: {0}")]
    GridTooSmall(String),

    #[error("extraction failed: {0}")]
    Extraction(String),

    #[error("no revival structure: {0}")]
    NoRevival(String),

    #[error("series span too short: {0}")]
    Span(String),

    #[error("config error at {pointer}: {message}")]
    Config { pointer: String, message: String },

    #[error("validation error ({invariant}): {message}")]
    Validation { invariant: String, message: String },

    #[error("unknown recipe '{name}'; available: {available}")]
    UnknownRecipe { name: String, available: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_)
            | Error::Config { .. }
            | Error::Validation { .. }
            | Error::UnknownRecipe { .. }
            | Error::GridTooSmall(_)
            | Error::StepTooLarge(_)
            | Error::Regime(_)
            | Error::Expansion(_)
            | Error::Span(_) => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
