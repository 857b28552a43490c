use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("enumeration budget exceeded: {what} needs {needed} units but the budget is {budget}; {hint}")]
    BudgetExceeded {
        what: String,
        needed: u128,
        budget: u128,
        hint: String,
    },

    #[error("rejection budget exhausted after {attempts} rejected draws (P(E) too small for the chosen gamma, tau)")]
    RejectionBudgetExhausted { attempts: usize },

    #[error("lambda = {lambda} is too small: need lambda^2 > k/sigma2 + 1/2 = {bound}")]
    LambdaTooSmall { lambda: f64, bound: f64 },

    #[error("invalid alpha = {0}: log(1 + k/sigma2) + log(1 - alpha) must be positive")]
    InvalidAlpha(f64),

    #[error("observation vector is identically zero (n = 0?)")]
    ZeroObservation,

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialization(String),
}

impl Error {
    /// Precondition and budget failures are user-correctable; the rest are not.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Serialization(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
