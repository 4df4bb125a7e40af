use thiserror::Error;

/// Errors raised by the simulation, statistics and budget layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("fock index {index} is outside the {mode} truncation of dimension {dim}")]
    Truncation {
        mode: &'static str,
        index: usize,
        dim: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("step size underflow at t = {t:e} s (h = {h:e} s)")]
    Stiffness { t: f64, h: f64 },

    #[error("integrator failure: {0}")]
    IntegratorFailure(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("bootstrap failed: {0}")]
    Bootstrap(String),

    #[error("malformed input: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerical machinery (integrator, root finding).
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Stiffness { .. }
                | Error::IntegratorFailure(_)
                | Error::Calibration(_)
                | Error::Truncation { .. }
        )
    }

    /// True for failures of the photon-count inference pipeline.
    pub fn is_statistics(&self) -> bool {
        matches!(self, Error::Fit(_) | Error::Bootstrap(_) | Error::Format(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
