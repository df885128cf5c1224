//! Error taxonomy shared by the library and the command-line front end.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration, schedule, or grid request.
    #[error("configuration error: {0}")]
    Config(String),

    /// Control synthesis has no real solution (denominator never positive,
    /// or the requested efficiency exceeds what the stored amplitude allows).
    /// Carries the signed feasibility profile for diagnosis.
    #[error("synthesis infeasible: {message}")]
    Infeasible {
        message: String,
        profile: Vec<(f64, f64)>,
    },

    /// Numeric breakdown: unstable step size, NaN/Inf in a propagation.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// A root/parameter search exhausted its bracket without a solution.
    #[error("search failed: {0}")]
    NotFound(String),

    /// Discrete-oracle cross-check disagreed with the ODE engines beyond
    /// the first-order bound.
    #[error("oracle mismatch: {0}")]
    OracleMismatch(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
