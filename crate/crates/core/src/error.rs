use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A label (or aggregated label) has no discordant pair to rank.
    #[error("degenerate label{}: {reason}", label.map(|k| format!(" {k}")).unwrap_or_default())]
    DegenerateLabel { label: Option<usize>, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid costs: {0}")]
    InvalidCosts(String),

    #[error("table scorers have no trainable parameters")]
    NotTrainable,

    #[error("enumeration needs {required} hypotheses, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u64 },

    #[error("instance set of size {n} is too large for exhaustive search (max {max})")]
    TooLarge { n: usize, max: usize },

    /// The conditional label variance vanishes for some instance pair.
    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("data error: {0}")]
    Data(String),
}

impl Error {
    pub(crate) fn degenerate(label: Option<usize>, reason: impl Into<String>) -> Self {
        Error::DegenerateLabel {
            label,
            reason: reason.into(),
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Data(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Data(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
