use thiserror::Error;

/// Errors raised by kernel evaluation, quadrature, norms, solvers and the harness.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (e.g. `t <= 0`).
    #[error("domain error: {0}")]
    Domain(String),
    /// A configuration or exponent set is inadmissible.
    #[error("configuration error: {0}")]
    Config(String),
    /// A quadrature or norm produced a non-finite value.
    #[error("non-finite value {value} at {location}")]
    NonFinite { value: f64, location: String },
    /// A weighted norm overflowed at a given sample.
    #[error("weighted norm overflow at {location}")]
    Overflow { location: String },
    /// Input data violates a precondition of a fit or report.
    #[error("data error: {0}")]
    Data(String),
    /// The fixed-point search did not contract.
    #[error("solver failure: {reason} (ratio history {history:?})")]
    SolverFailure { reason: String, history: Vec<f64> },
    /// A search exhausted its cap.
    #[error("search failure: {reason} (history {history:?})")]
    SearchFailure { reason: String, history: Vec<(f64, f64)> },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(value: f64, location: impl FnOnce() -> String) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite {
            value,
            location: location(),
        })
    }
}
