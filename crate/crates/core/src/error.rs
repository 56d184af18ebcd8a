use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("softmax over an empty neighbourhood")]
    EmptyMask,
    #[error("segment id {id} out of range (n_segments = {n})")]
    SegmentOutOfRange { id: usize, n: usize },
    #[error("turbines {i} and {j} are coincident")]
    CoincidentTurbines { i: usize, j: usize },
    #[error("placement budget exhausted for farm {farm} ({count} turbines)")]
    InfeasibleLayout { farm: usize, count: usize },
    #[error("sequence length {len} exceeds padded capacity {capacity} in scenario {scenario}")]
    Capacity {
        len: usize,
        capacity: usize,
        scenario: usize,
    },
    #[error("non-finite gradient for parameter {name}")]
    NonFiniteGradient { name: String },
    #[error("training diverged: validation MAE {mae} exceeds 10x initial {initial}")]
    Diverged { mae: f64, initial: f64 },
    #[error("checkpoint has no attention sites enabled")]
    NoAttention,
    #[error("invalid config: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
