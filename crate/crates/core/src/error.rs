use thiserror::Error;

/// Errors produced by the estimation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error in {func}: {detail}")]
    Domain { func: &'static str, detail: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("probit separation detected (|gamma| > 50); use random initialization instead")]
    Separation,

    #[error("rank-deficient design: {0}")]
    RankDeficient(String),

    #[error("sampler aborted: {0}")]
    Sampler(String),

    #[error("insufficient draws: {0}")]
    InsufficientDraws(String),

    #[error("operation requires the {expected} family, got {got}")]
    Family { expected: &'static str, got: String },

    #[error("parse error at row {row}, column {column}: {detail}")]
    Parse { row: usize, column: String, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(func: &'static str, detail: impl Into<String>) -> Error {
    Error::Domain { func, detail: detail.into() }
}
