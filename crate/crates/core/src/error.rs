use thiserror::Error;

/// Errors produced by model fitting, residual computation, and the
/// simulation studies.
#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of a special function.
    #[error("domain error in {func}: {msg}")]
    Domain { func: &'static str, msg: String },

    /// Mismatched vector/matrix dimensions.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A data row violates the composition invariants.
    #[error("invalid data row {row}: {msg}")]
    InvalidRow { row: usize, msg: String },

    /// Maximum-likelihood fit could not proceed (non-finite likelihood
    /// during line search). The bootstrap engine treats this as retryable.
    #[error("fit failed: {0}")]
    FitFailure(String),

    /// A bootstrap replicate kept failing after the configured retries.
    #[error("replicate {replicate} failed after {retries} retries: {msg}")]
    ReplicateFailure {
        replicate: usize,
        retries: usize,
        msg: String,
    },

    /// The observed information matrix is numerically singular.
    #[error("singular information matrix (condition estimate {cond:.3e})")]
    SingularInformation { cond: f64 },

    /// Likelihood-ratio test requested for non-nested model specs.
    #[error("models are not nested: {0}")]
    NotNested(String),

    /// A fit is inconsistent with what the operation requires
    /// (e.g. a likelihood-ratio statistic below -1e-6).
    #[error("fit quality: {0}")]
    FitQuality(String),

    /// Invalid configuration or argument value.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
