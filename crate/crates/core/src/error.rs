use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),
    #[error("state is not in the dispersion class: {0}")]
    ClassMembership(String),
    #[error("degenerate state: {0}")]
    Degenerate(String),
    #[error("unsupported order {order}: {reason}")]
    UnsupportedOrder { order: usize, reason: String },
    #[error("odd moment order {0}: Gaussian odd moments vanish identically")]
    Parity(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
