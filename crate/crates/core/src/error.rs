use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {field} {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid channel realization: {0}")]
    InvalidChannel(String),

    #[error("grid too large: {evaluations} evaluations exceeds the limit of {limit}")]
    GridTooLarge { evaluations: u128, limit: u128 },

    #[error("order enumeration limited to {max} users, got {users}")]
    TooManyUsersForGrid { users: usize, max: usize },

    #[error("invalid grid specification: {0}")]
    InvalidGrid(String),

    #[error("subproblem solve failed after anchor-floor retry: {0}")]
    Subsolver(String),
}

pub(crate) fn check_len(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch {
            what,
            expected,
            found,
        });
    }
    Ok(())
}
