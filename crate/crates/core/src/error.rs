use thiserror::Error;

#[derive(Debug, Error)]
pub enum SoupError {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("killing function is identically zero")]
    ZeroKilling,
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vertices {0} and {1} are not adjacent")]
    NotAdjacent(usize, usize),
    #[error("invalid loop: {0}")]
    InvalidLoop(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("transition matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("generator is not Hermitian (residual {0:e})")]
    NotHermitian(f64),
    #[error("loop enumeration exceeded the cap of {0} loops")]
    EnumerationCap(usize),
    #[error("invalid planar embedding: {0}")]
    InvalidEmbedding(String),
    #[error("face {0} is the infinite face")]
    InfiniteFace(usize),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SoupError>;
