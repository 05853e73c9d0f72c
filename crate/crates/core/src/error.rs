use thiserror::Error;

use crate::dynamics::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("evaluation budget exceeded: requested {requested}, remaining {remaining}")]
    BudgetExceeded { requested: u64, remaining: u64 },

    #[error("budget {budget} is too small: at least {required} evaluations are needed")]
    BudgetTooSmall { budget: u64, required: u64 },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    /// A state became non-finite. `partial` carries the trajectory up to the
    /// last finite state when one was being recorded.
    #[error("numerical overflow: {context}")]
    NumericalOverflow {
        context: String,
        partial: Option<Box<Trajectory>>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn overflow(context: impl Into<String>) -> Self {
        Error::NumericalOverflow {
            context: context.into(),
            partial: None,
        }
    }

    /// Process exit code used by the `ssw` binary.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) | Error::BudgetTooSmall { .. } => 2,
            _ => 3,
        }
    }
}
