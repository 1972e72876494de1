use thiserror::Error;

/// Errors raised anywhere in the simulation and fitting stack.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A physical input lies outside the domain where the model is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A parameter struct violates one of its invariants.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The steady-state linear system could not be solved reliably.
    #[error("singular steady-state system (1-norm condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    /// The fixed-step integrator did not converge under step halving.
    #[error(
        "integration failed to converge: max deviation {deviation:.3e} after {halvings} halvings (step {step:.3e} us)"
    )]
    Integration {
        deviation: f64,
        halvings: u32,
        step: f64,
    },

    /// A spectrum has no interior maximum (flat or monotone).
    #[error("no peak: {0}")]
    NoPeak(String),

    /// A curve has no spectral component above its noise floor.
    #[error("no oscillation above noise floor (peak/floor ratio {ratio:.2})")]
    NoOscillation { ratio: f64 },

    /// A fit cannot be set up because the data carry no information.
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    /// Stationary-orbit search found no root in the bracket.
    #[error("no stationary orbit between {lo_nm} nm and {hi_nm} nm")]
    NoOrbit { lo_nm: f64, hi_nm: f64 },

    /// Input data violates the container invariants.
    #[error("invalid data: {0}")]
    Data(String),

    /// Failure while reading or writing CSV.
    #[error("csv: {0}")]
    Csv(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub(crate) fn ensure_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {value}"),
        })
    }
}

pub(crate) fn ensure_nonnegative(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and >= 0, got {value}"),
        })
    }
}

pub(crate) fn ensure_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must lie in [0, 1], got {value}"),
        })
    }
}
