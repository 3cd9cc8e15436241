use thiserror::Error;

/// Everything that can go wrong inside the engine.
///
/// Validation failures (bad parameters, broken scheme invariants) are kept
/// apart from numerical failures so callers can map them to distinct exit
/// codes; see [`Error::is_validation`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid sampling scheme: {0}")]
    InvalidScheme(String),

    #[error("operation not supported for {scheme}: {reason}")]
    Unsupported { scheme: &'static str, reason: &'static str },

    #[error("quadrature did not converge (estimate {estimate:e}, error estimate {abs_error:e})")]
    Quadrature { estimate: f64, abs_error: f64 },

    #[error("privacy loss {s} is outside the image of the loss function (must exceed {lower})")]
    OutOfDomain { s: f64, lower: f64 },

    #[error(
        "loss inversion did not converge at s = {s} after {iterations} iterations \
         (last t = {t}, residual {residual:e})"
    )]
    NoConvergence { s: f64, iterations: usize, t: f64, residual: f64 },

    #[error("non-finite value in {stage} at index {index}")]
    NonFinite { stage: &'static str, index: usize },

    #[error("epsilon {epsilon} lies beyond the discretization grid (must be below {limit})")]
    EpsilonBeyondGrid { epsilon: f64, limit: f64 },

    #[error("noise calibration failed: {0}")]
    Calibration(String),

    #[error("training diverged at iteration {iteration} (loss {loss:e})")]
    Diverged { iteration: usize, loss: f64 },
}

impl Error {
    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::InvalidScheme(_) | Error::Unsupported { .. }
        )
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_finite(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite, got {x}")))
    }
}

pub(crate) fn check_positive(name: &'static str, x: f64) -> Result<()> {
    check_finite(name, x)?;
    if x > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {x}")))
    }
}

pub(crate) fn check_nonnegative(name: &'static str, x: f64) -> Result<()> {
    check_finite(name, x)?;
    if x >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be nonnegative, got {x}")))
    }
}

pub(crate) fn check_open_unit(name: &'static str, x: f64) -> Result<()> {
    check_finite(name, x)?;
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must lie in (0, 1), got {x}")))
    }
}
