use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty vector")]
    EmptyInput,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("singular matrix at pivot {pivot}")]
    SingularMatrix { pivot: usize },
    #[error("matrix not symmetric (max asymmetry {max_asym:.3e})")]
    NotSymmetric { max_asym: f64 },
    #[error("dense cap exceeded: {size} > {cap}")]
    DenseCapExceeded { size: usize, cap: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("level {level} out of range (L = {total})")]
    LevelOutOfRange { level: usize, total: usize },
    #[error("non-finite value in {context}")]
    NonFinite { context: String },
    #[error("solver diverged at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("operator is not flagged SPD")]
    NotSpd,
    #[error("CG breakdown: p'Ap = {value:.3e} <= 0 (system not SPD)")]
    CgBreakdown { value: f64 },
    #[error("missing smoother for level {level}")]
    MissingSmoother { level: usize },
    #[error("mask variant mismatch: expected {expected}, got {got}")]
    MaskVariantMismatch {
        expected: &'static str,
        got: &'static str,
    },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint version mismatch: file {file}, supported {supported}")]
    CheckpointVersion { file: u32, supported: u32 },
    #[error("checkpoint problem hash mismatch (file {file:016x}, expected {expected:016x})")]
    CheckpointHashMismatch { file: u64, expected: u64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
