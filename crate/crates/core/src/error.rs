use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not skew-symmetric (max |A + A^T| = {residual:e})")]
    NotSkewSymmetric { residual: f64 },

    #[error("theorem conditions violated ({0})")]
    ConditionsViolated(String),

    #[error("estimation diagnostic: {0}")]
    Estimation(String),

    #[error("invariant `{invariant}` violated: {detail}")]
    Verification { invariant: String, detail: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn verification(invariant: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Verification {
            invariant: invariant.into(),
            detail: detail.into(),
        }
    }
}
