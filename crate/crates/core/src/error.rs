use thiserror::Error;

/// Errors raised across the clustering pipeline.
#[derive(Debug, Error)]
pub enum ClamrError {
    #[error("meaningful regions of feature `{feature}` overlap: [{a_lower}, {a_upper}] and [{b_lower}, {b_upper}]")]
    Overlap {
        feature: String,
        a_lower: f64,
        a_upper: f64,
        b_lower: f64,
        b_upper: f64,
    },
    #[error("empty region [{lower}, {upper}] in feature `{feature}`")]
    EmptyRegion {
        feature: String,
        lower: f64,
        upper: f64,
    },
    #[error("non-finite region endpoint in feature `{feature}`")]
    NonFinite { feature: String },
    #[error("feature `{0}` has no meaningful regions")]
    NoRegions(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid dataset: {0}")]
    Data(String),
    #[error("partition lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no draws supplied")]
    EmptyDraws,
    #[error("at least {needed} retained draws required, got {got}")]
    InsufficientDraws { needed: usize, got: usize },
    #[error("exhaustive search over set partitions of {0} items exceeds the limit of {1}")]
    CandidateSpaceTooLarge(usize, usize),
    #[error("calibration failed: {0}")]
    Convergence(String),
    #[error("missing values are not supported by {0}")]
    MissingData(&'static str),
    #[error("malformed draws store: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = ClamrError> = std::result::Result<T, E>;
