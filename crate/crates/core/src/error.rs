use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is not row-stochastic: {0}")]
    NotStochastic(String),

    #[error("chain has {closed_classes} closed classes; the stationary distribution is not unique")]
    NotIrreducible { closed_classes: usize },

    #[error("stationary residual {residual:e} exceeds tolerance {tolerance:e}")]
    NumericalFailure { residual: f64, tolerance: f64 },

    #[error("power iteration did not converge within {steps} steps (last change {last_change:e})")]
    NonConvergence { steps: usize, last_change: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("unknown sweep axis `{0}` (expected one of q1, q2, lambda, d, gamma_db)")]
    UnknownAxis(String),

    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::param(name, format!("{value} is not a probability in [0, 1]")))
    }
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("{value} must be positive and finite")))
    }
}
