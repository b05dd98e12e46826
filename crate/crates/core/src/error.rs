use thiserror::Error;

/// Errors produced anywhere in the preference stack.
#[derive(Debug, Error)]
pub enum PrefError {
    #[error("dimension mismatch: k={left} vs k={right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("embedding length {0} is not a positive even number")]
    OddEmbedding(usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("beta must be positive, got {0}")]
    InvalidBeta(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown context `{0}`")]
    UnknownContext(String),

    #[error("unknown item `{item}` in context `{context}`")]
    UnknownItem { context: String, item: String },

    #[error("items belong to different contexts: `{left}` vs `{right}`")]
    ContextMismatch { left: String, right: String },

    #[error("embedding for `{item}` in context `{context}` has zero norm and cannot be normalized")]
    ZeroNorm { context: String, item: String },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("matrix is not skew-symmetric: |P[{row}][{col}] + P[{col}][{row}]| = {asymmetry:e}")]
    NotSkew { row: usize, col: usize, asymmetry: f64 },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("spectral construction needs an even dimension, got {0}")]
    OddDimension(usize),

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("example {index} has prob={prob}; MSE needs a soft label in (0,1), use the CE loss for hard labels")]
    HardLabelUnderMse { index: usize, prob: f64 },

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = PrefError> = std::result::Result<T, E>;
