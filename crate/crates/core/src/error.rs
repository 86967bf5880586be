use thiserror::Error;

/// Errors produced by the design, decoding and experiment routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid block structure: {0}")]
    BlockStructure(String),

    #[error("dictionary is rank deficient: smallest eigenvalue of DD' is {smallest:e}, largest {largest:e}")]
    RankDeficient { smallest: f64, largest: f64 },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not symmetric (relative asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("alpha must lie strictly inside (0, 1), got {0}")]
    Alpha(f64),

    #[error("column {0} has zero norm")]
    ZeroColumn(usize),

    #[error("inter-block coherence requires equal block sizes")]
    UnequalBlocks,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("selected sub-dictionary for blocks {support:?} is rank deficient")]
    SingularSupport { support: Vec<usize> },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
