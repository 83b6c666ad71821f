use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configured resource cap (sieve limit, enumeration size, index cap,
    /// repair budget) was hit before the computation could finish.
    #[error("capacity exceeded: {what} (limit {limit}){}", achieved.map(|a| format!(", achieved {a:e}")).unwrap_or_default())]
    Capacity {
        what: String,
        limit: u64,
        achieved: Option<f64>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("exponents must be pairwise distinct: alpha[{first}] = alpha[{second}] = {value}")]
    DuplicateExponent { first: usize, second: usize, value: f64 },

    #[error("no pool element in window ({lo}, {hi}] after element {after}")]
    EmptyWindow { after: u64, lo: f64, hi: f64 },

    #[error("could not certify coordinate {coordinate} at stage {stage}: {detail}")]
    Refinement {
        stage: usize,
        coordinate: usize,
        detail: String,
    },

    #[error("postcondition violated: {0}")]
    Postcondition(String),

    /// An injectivity or disjointness witness failed inside the construction.
    /// This is a bug in the construction, never a property of the input.
    #[error("internal witness failure: {0}")]
    Witness(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

impl Error {
    pub(crate) fn capacity(what: impl Into<String>, limit: u64) -> Self {
        Error::Capacity {
            what: what.into(),
            limit,
            achieved: None,
        }
    }

    pub(crate) fn capacity_with(what: impl Into<String>, limit: u64, achieved: f64) -> Self {
        Error::Capacity {
            what: what.into(),
            limit,
            achieved: Some(achieved),
        }
    }

    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::Capacity { .. })
    }
}
