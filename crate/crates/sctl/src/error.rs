use thiserror::Error;

/// Crate-wide error type.
///
/// Variants map onto the CLI exit-code contract: `Config`/`Usage` exit 1,
/// `Numeric`/`Divergence`/`Design` exit 2.
#[derive(Debug, Error)]
pub enum SctlError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("rejected non-finite input: {0}")]
    NonFinite(String),

    #[error("simulation diverged at step {step}: {detail}")]
    Divergence { step: usize, detail: String },

    #[error("controller design error: {0}")]
    Design(String),

    #[error("numeric failure: {what} (residual {residual:e})")]
    Numeric { what: String, residual: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl SctlError {
    /// Exit code for the CLI: 1 for usage/config problems, 2 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            SctlError::Config(_) | SctlError::Usage(_) | SctlError::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, SctlError>;
