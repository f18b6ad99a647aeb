use thiserror::Error;

/// Errors shared by the whole pipeline.
///
/// Every variant maps to one of the process exit codes used by the CLI:
/// invalid input (2), a size gate or term budget being exceeded (3), or an
/// internal invariant failing (4, always a bug).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("division by zero in GF({q})")]
    DivisionByZero { q: u32 },

    #[error("alpha must lie strictly in (0, 1/2), got {alpha}")]
    InfeasibleAlpha { alpha: String },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{what} = {size} exceeds gate {gate}")]
    TooLarge {
        what: &'static str,
        size: u128,
        gate: u128,
    },

    #[error("estimated {estimate} terms exceeds expansion budget {budget}")]
    BudgetExceeded { estimate: u128, budget: u64 },

    #[error("invariant violation (bug): {0}")]
    InvariantViolation(String),

    #[error("internal error (bug): {0}")]
    Internal(String),
}

impl Error {
    /// CLI exit code for this error: 2 invalid input, 3 gate exceeded,
    /// 4 invariant violation.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::InvalidField(_)
            | Error::DivisionByZero { .. }
            | Error::InfeasibleAlpha { .. }
            | Error::InvalidInstance(_)
            | Error::InvalidInput(_)
            | Error::Precondition(_) => 2,
            Error::TooLarge { .. } | Error::BudgetExceeded { .. } => 3,
            Error::InvariantViolation(_) | Error::Internal(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
