use thiserror::Error;

/// Library-wide error type. Variants that describe bad user input map to
/// CLI exit code 2; verdict failures are not errors (reports carry them).
#[derive(Debug, Error)]
pub enum Error {
    #[error("word too short: need {needed} letters, have {have}")]
    WordTooShort { needed: usize, have: usize },

    #[error("invalid word: {0}")]
    InvalidWord(String),

    #[error("parameter out of range: {0}")]
    InvalidParameter(String),

    #[error("degenerate derivative at x = {x}: |f'| = {deriv:e}")]
    DegenerateDerivative { x: f64, deriv: f64 },

    #[error("pullback failed at step {step}: ball straddles a branch boundary; largest feasible delta ~= {feasible_delta:e}")]
    ReduceDelta { step: usize, feasible_delta: f64 },

    #[error("order {order} is not a certified hyperbolic time for sigma = {sigma}")]
    NotHyperbolicTime { order: usize, sigma: f64 },

    #[error("cover gap: point {x} lies in no cover region")]
    CoverGap { x: f64 },

    #[error("invalid bound: A = {bound} is below sup a_i = {sup}")]
    InvalidBound { bound: f64, sup: f64 },

    #[error("infeasible example: {0}")]
    InfeasibleExample(String),

    #[error("budget exhausted: {0}")]
    BudgetExhausted(String),

    #[error("system definition: {0}")]
    SystemFile(String),

    #[error("root finding did not converge solving f(z) = {target} (best |residual| = {residual:e})")]
    RootFind { target: f64, residual: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
