use thiserror::Error;

/// Failures raised by the simulation and analysis routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SlugError {
    #[error("parameter `{field}` out of domain: {reason}")]
    ParameterDomain { field: &'static str, reason: String },

    #[error("integration unstable at t = {time:.3}: |dδ/dt| = {rate:.3e} exceeds {bound:.3e}")]
    IntegrationStability { time: f64, rate: f64, bound: f64 },

    #[error("finite-difference gradient needs at least 3 grid points, got {0}")]
    GradientUndefined(usize),

    #[error("probe amplitude outside linear response: {quantity} changed by {change:.1}% when the probe was halved")]
    Nonlinearity { quantity: &'static str, change: f64 },

    #[error("bias is in the zero-voltage state (V = {v_mean:.3e} V); gain is undefined")]
    BiasState { v_mean: f64 },

    #[error("passivity violation: {0}")]
    PassivityViolation(String),

    #[error("invalid pulse sequence: {0}")]
    SequenceValidation(String),
}

pub type Result<T> = std::result::Result<T, SlugError>;

pub(crate) fn domain(field: &'static str, reason: impl Into<String>) -> SlugError {
    SlugError::ParameterDomain {
        field,
        reason: reason.into(),
    }
}
