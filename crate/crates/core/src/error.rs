use thiserror::Error;

/// Errors raised by the surrogate, sampling and design routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("cannot parameterize {family} marginal: {reason}")]
    Parameterization { family: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coordinate {coordinate} = {value} is outside the support of its marginal ({reason})")]
    Domain {
        coordinate: usize,
        value: f64,
        reason: String,
    },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("least-squares system is singular (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("leave-one-out error undefined: leverage h[{index}] = {leverage} (interpolating design)")]
    DegenerateLoo { index: usize, leverage: f64 },

    #[error("response variance is zero; relative error is undefined")]
    ZeroVariance,

    #[error("candidate pool exhausted: requested {requested}, available {available}")]
    PoolExhausted { requested: usize, available: usize },

    #[error("design is singular for the requested basis ({0})")]
    SingularDesign(String),

    #[error("truss mechanics error: {0}")]
    Mechanics(String),

    #[error("root finder failed: {0}")]
    Convergence(String),

    #[error("model evaluation failed at {point:?}: {message}")]
    Oracle { point: Vec<f64>, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;
