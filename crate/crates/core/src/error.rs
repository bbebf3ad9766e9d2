use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: String,
    },

    #[error("lambda = {lambda} outside the domain of the Laplace exponent (theta_max = {theta_max})")]
    OutsideExponentDomain { lambda: f64, theta_max: f64 },

    #[error("time {t} exceeds path horizon {horizon}")]
    BeyondHorizon { t: f64, horizon: f64 },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("infinite total rate: {0}")]
    InfiniteMass(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("ODE solver failed at s = {s}: {reason}")]
    SolverFailure { s: f64, reason: String },

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and strictly positive".into(),
        })
    }
}

pub(crate) fn require_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite".into(),
        })
    }
}
