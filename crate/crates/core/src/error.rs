use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("regressor matrix has no nonzero column")]
    ZeroRegressors,

    #[error("covariance matrix is singular")]
    SingularCovariance,

    #[error("interpolating residual: KKT conditions undefined (certificate residual {certificate_residual:e})")]
    Interpolation { certificate_residual: f64 },

    #[error("support enumeration too large: {0} columns (limit 20)")]
    EnumerationTooLarge(usize),

    #[error("network is unstable")]
    Unstable,

    #[error("simulation diverged at sample {0}")]
    Diverged(usize),

    #[error("no stable network found after {0} topology draws")]
    PersistentInstability(usize),

    #[error("noise filter is not invertible")]
    NonInvertibleNoiseFilter,

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable identifier used in machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::IndexOutOfRange(_) => "index_out_of_range",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::ZeroRegressors => "zero_regressors",
            Error::SingularCovariance => "singular_covariance",
            Error::Interpolation { .. } => "interpolation",
            Error::EnumerationTooLarge(_) => "enumeration_too_large",
            Error::Unstable => "unstable",
            Error::Diverged(_) => "diverged",
            Error::PersistentInstability(_) => "persistent_instability",
            Error::NonInvertibleNoiseFilter => "non_invertible_noise_filter",
            Error::Undefined(_) => "undefined",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
