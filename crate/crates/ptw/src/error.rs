use thiserror::Error;

/// Errors produced by the simulation and solver layers.
#[derive(Debug, Error)]
pub enum PtwError {
    /// Model or grid parameters violate an invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An operation that requires the Ornstein-Uhlenbeck curvature drift was
    /// called with a different drift.
    #[error("operation requires the OU drift (got {0})")]
    RequiresOuDrift(&'static str),

    /// Negative elapsed time passed to a transition law.
    #[error("elapsed time must be nonnegative (got {0})")]
    NegativeTime(f64),

    /// A rescaled sample was requested beyond the simulated horizon.
    #[error("trajectory horizon {horizon} too short, need {needed}")]
    HorizonTooShort { horizon: f64, needed: f64 },

    /// Right-hand side incompatible with the solver (e.g. mean too large).
    #[error("incompatible right-hand side: {0}")]
    IncompatibleRhs(String),

    /// An iterative numerical routine failed to converge.
    #[error("no convergence: {0}")]
    NoConvergence(String),

    /// Statistical routine was fed an unusable sample.
    #[error("bad sample: {0}")]
    BadSample(String),
}

pub type Result<T> = std::result::Result<T, PtwError>;
