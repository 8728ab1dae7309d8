use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model, config, or suite text failed to parse.
    #[error("parse error in `{term}`: {reason}")]
    Parse { term: String, reason: String },

    /// A structurally valid config that violates its bounds for the given model.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation that needs uncovered tuples was handed an exhausted store.
    #[error("tuple store is empty")]
    EmptyStore,

    /// The independent coverage check found gaps in a suite the generator
    /// considered complete. Always a bug.
    #[error("internal consistency failure: suite misses {missing} of {required} required tuples")]
    CoverageGap { missing: usize, required: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(term: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Parse {
            term: term.into(),
            reason: reason.into(),
        }
    }
}
