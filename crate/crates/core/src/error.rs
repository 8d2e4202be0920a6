use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Mathematical precondition violated (empty point set, zero vector, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Scenario or stream document does not match the schema or breaks an
    /// invariant. `path` points into the document, e.g. `users[1].screens[0].dims`.
    #[error("invalid document at {path}: {message}")]
    Schema { path: String, message: String },

    #[error("user {user} has no usable capacity: every cell was removed")]
    NoCapacity { user: usize },

    #[error("instance too large for exhaustive search: {combinations} combinations (limit {limit})")]
    TooLarge { combinations: f64, limit: f64 },

    /// Internal mismatch between the solver output and the merged layout.
    #[error("inconsistent merge state: {0}")]
    Inconsistent(String),

    #[error("pose stream out of order at record {index}: t={t} after t={previous}")]
    UnorderedStream { index: usize, t: f64, previous: f64 },
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema { path: path.into(), message: message.into() }
    }
}
