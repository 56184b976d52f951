use thiserror::Error;

/// Errors raised by the model, the closed-form results and both oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{name}` = {value} out of range: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("operating point is at or above threshold (lambda_plus = {lambda_plus}, lambda_minus = {lambda_minus})")]
    AboveThreshold { lambda_plus: f64, lambda_minus: f64 },

    #[error("step size {dt} violates the stability margin (dt * fastest rate = {product} >= {limit})")]
    StepSize { dt: f64, product: f64, limit: f64 },

    #[error("quadrature noise is not classically representable (diff_plus = {diff_plus}, diff_minus = {diff_minus})")]
    Representability { diff_plus: f64, diff_minus: f64 },

    #[error("Fock-space dimension {0} is too small (need at least 2)")]
    Dimension(usize),

    #[error("truncation leak: population {population:e} in the top two Fock levels of dim {dim}")]
    TruncationLeak { dim: usize, population: f64 },

    #[error("truncation scan did not converge (largest dim {dim} leaks {population:e})")]
    NonConvergence { dim: usize, population: f64 },

    #[error("propagation did not reach a fixed point by t = {t_max}")]
    NoFixedPoint { t_max: f64 },

    /// Malformed sweep spec, preset, scope or profile name.
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
