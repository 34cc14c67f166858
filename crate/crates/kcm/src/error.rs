use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum KcmError {
    #[error("invalid update family: {0}")]
    InvalidFamily(String),

    #[error("operation requires dimension {expected}, family has dimension {got}")]
    Dimension { expected: usize, got: usize },

    #[error("direction vector must be nonzero")]
    ZeroDirection,

    #[error("family is not supercritical")]
    NotSupercritical,

    #[error("certificate search budget exhausted (max_a1={max_a1}, max_a2={max_a2})")]
    BudgetExhausted { max_a1: i64, max_a2: i64 },

    #[error("rate must lie in [0,1], got {0}")]
    InvalidRate(f64),

    #[error("probability must lie in [0,1], got {0}")]
    InvalidProbability(f64),

    #[error("horizon must be nonnegative, got {0}")]
    NegativeHorizon(f64),

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("state space too large: {sites} sites exceeds the 16-site generator limit")]
    StateSpaceTooLarge { sites: usize },

    #[error("site {0:?} outside geometry")]
    OutOfGeometry(crate::family::Vec2),

    #[error("enumeration guard exceeded: count passed {guard}")]
    GuardExceeded { guard: u64 },

    #[error("path too short: length {len} < required {required}")]
    PathTooShort { len: f64, required: f64 },

    #[error("disagreement-path construction failed: {0}")]
    PathConstruction(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("too few positive points for exponential fit: {0}")]
    TooFewPoints(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, KcmError>;
