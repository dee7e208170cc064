use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Variants split into two families: configuration problems (bad parameters,
/// malformed documents) and numerical guards (quadrature that will not
/// converge, singular systems, runaway rates). [`Error::is_config`] tells
/// them apart so the CLI can map them to distinct exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("adaptive quadrature exceeded depth {depth} on [{a}, {b}]")]
    QuadratureFailure { a: f64, b: f64, depth: u32 },

    #[error("flow left the nonnegative orthant (coordinate {coord} reached {value:e})")]
    LeftOrthant { coord: usize, value: f64 },

    #[error("total jump rate {rate:e} exceeds the configured cap {cap:e}")]
    RateOverflow { rate: f64, cap: f64 },

    #[error("no jump can occur from a state with zero total burst rate")]
    ZeroHazardJump,

    #[error("truncation at {n_max} is insufficient: {reason}")]
    TruncationInsufficient { n_max: usize, reason: String },

    #[error("linear system is singular at pivot {pivot} (reducible truncated chain?)")]
    SingularSystem { pivot: usize },

    #[error("empty averaging window: burn-in {burn_in} >= end time {end}")]
    EmptyWindow { burn_in: f64, end: f64 },

    #[error("cdf is not monotone near x = {x}")]
    NonMonotoneCdf { x: f64 },

    #[error("dissipativity margin is not positive: {margin}")]
    NonDissipative { margin: f64 },

    #[error("degenerate contraction fit: {0}")]
    DegenerateFit(String),

    #[error("gradient inconsistent with finite differences at coordinate {coord}: {analytic} vs {numeric}")]
    GradientMismatch {
        coord: usize,
        analytic: f64,
        numeric: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for user-side configuration problems, false for numerical guards.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter(_)
                | Error::Config(_)
                | Error::DimensionMismatch { .. }
                | Error::Json(_)
                | Error::NonDissipative { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
