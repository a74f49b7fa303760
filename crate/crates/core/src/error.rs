use thiserror::Error;

/// Error type shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine converged, but not to the requested accuracy.
    #[error("accuracy error: {what} (achieved {achieved:e}, requested {requested:e})")]
    Accuracy {
        what: String,
        achieved: f64,
        requested: f64,
    },

    /// An invalid combination of run parameters (step sizes, grids, flags).
    #[error("configuration error: {0}")]
    Config(String),

    /// A trajectory blew up where no growth was expected.
    #[error("divergence: {0}")]
    Divergence(String),

    /// An internal invariant failed; indicates a bug, not bad user input.
    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
