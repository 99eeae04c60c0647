use thiserror::Error;

/// Errors produced by the simulation and synthesis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid oscillator spec: {0}")]
    InvalidSpec(String),

    #[error("invalid gate task: {0}")]
    InvalidTask(String),

    #[error("time {t} ns outside pulse window [0, {duration}] ns")]
    Domain { t: f64, duration: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("propagation failed: unitarity defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    Propagation { defect: f64, tol: f64 },

    #[error("missing checkpoints: {0}")]
    MissingCheckpoints(String),

    #[error("non-finite objective at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error(
        "slope window [{lo:.4e}, {hi:.4e}] contains {found} grid points, need at least 2; densify the eps/xi grid"
    )]
    Window { lo: f64, hi: f64, found: usize },

    #[error("anchor {anchor:.4e} outside curve range [{lo:.4e}, {hi:.4e}]")]
    Anchor { anchor: f64, lo: f64, hi: f64 },

    #[error("invalid pulse: {0}")]
    InvalidPulse(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
