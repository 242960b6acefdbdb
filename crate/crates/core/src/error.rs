use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument outside the domain of the operation.
    #[error("domain error: {what}")]
    Domain { what: String },

    /// A coordinate whose (pooled) sample variance is zero.
    #[error("degenerate variance at coordinate {coordinate}")]
    DegenerateVariance { coordinate: usize },

    #[error("dimension mismatch: {what}")]
    DimensionMismatch { what: String },

    #[error("invalid sample: {what}")]
    InvalidSample { what: String },

    #[error("matrix factorization failed: {what}")]
    Factorization { what: String },

    #[error("gave up after {attempts} attempts: {what}")]
    RetriesExhausted { attempts: usize, what: String },
}

impl Error {
    pub(crate) fn domain(what: impl Into<String>) -> Self {
        Error::Domain { what: what.into() }
    }

    /// True for errors caused by constant coordinates rather than bad arguments.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::DegenerateVariance { .. })
    }
}
