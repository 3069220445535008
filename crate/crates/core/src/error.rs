use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented precondition or invariant.
    #[error("invalid {name}: {reason}")]
    Invalid { name: &'static str, reason: String },

    /// The stochastic integration produced a non-finite state.
    #[error("integration diverged at sample {index}")]
    Diverged { index: usize },

    /// The requested span contains samples below the extinction floor.
    #[error("phase undefined at sample {index}: intensity below extinction floor")]
    UndefinedPhase { index: usize },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            name,
            reason: reason.into(),
        }
    }
}

/// Returns `Err(Error::Invalid)` unless `cond` holds.
pub(crate) fn ensure(cond: bool, name: &'static str, reason: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::invalid(name, reason()))
    }
}
