use thiserror::Error;

/// Errors raised by this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Two or more rates coincide (after clustering) where distinct rates are required.
    #[error("degenerate rates: {0}; use the cluster-aware convolution instead")]
    DegenerateRates(String),

    /// A caller-side contract was violated (e.g. a non-density passed where a density is needed).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The request exceeds a fixed capacity limit.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A numerical routine failed to reach its accuracy target.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_non_negative(what: &str, x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("{what} must be non-negative, got {x}")));
    }
    Ok(())
}

pub(crate) fn check_rate(rate: f64) -> Result<()> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::Domain(format!(
            "rate must be finite and strictly positive, got {rate}"
        )));
    }
    Ok(())
}
