use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("particle weight must be positive and finite, got {0}")]
    NonPositiveWeight(f64),

    #[error("weight sum must be positive, got {0}")]
    NonPositiveWeightSum(f64),

    #[error("particle index {index} out of range for belief of {len} particles")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("belief has no particles")]
    EmptyBelief,

    #[error("reward cache tracks {cache} particles but the belief holds {belief}")]
    CacheDesync { cache: usize, belief: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("search trees diverged between variants: {0}")]
    TreeDigestMismatch(String),

    #[error("no run records to report")]
    EmptyRecords,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
