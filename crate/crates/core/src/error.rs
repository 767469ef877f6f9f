use thiserror::Error;

/// Everything that can go wrong while building a model or evaluating it.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid device parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },

    #[error("E_J/E_C = {ratio:.2} is below {min}; the transmon asymptotic formula does not apply")]
    TransmonRegime { ratio: f64, min: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("steady state is not unique (second smallest singular value {sigma:.3e} relative to largest)")]
    DegenerateSteadyState { sigma: f64 },

    #[error("linear system is singular")]
    Singular,

    #[error("resolvent (L + i delta) is singular at delta = {delta:.6e} rad/s")]
    ResolventSingular { delta: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("probe grid must be nonempty and strictly increasing")]
    InvalidGrid,

    #[error("oracle probe is outside the linear regime: doubling it changed r by {change:.3e}")]
    LinearityViolation { change: f64 },

    #[error("oracle did not converge: demodulated r drifted by {drift:.3e} between windows")]
    ConvergenceFailure { drift: f64 },

    #[error("invalid oracle configuration: {0}")]
    InvalidOracleConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
