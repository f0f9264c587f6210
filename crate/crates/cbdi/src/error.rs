//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A constructor or operation received parameters outside its domain.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A numerical quadrature did not reach the requested tolerance.
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    /// The adaptive ODE integrator failed (step underflow or step budget).
    #[error("ODE integration failed: {0}")]
    OdeSolver(String),

    /// The requested computation has no simulable form in this regime.
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    /// A path exceeded the configured localization cap.
    #[error("localization overflow: path reached level {level:.6e} (cap {cap:.6e})")]
    LocalizationOverflow { level: f64, cap: f64 },

    /// Picard iteration stopped without meeting the convergence criterion.
    #[error(
        "Picard iteration did not converge after {iterations} iterations \
         (last sup-difference {last_diff:.3e})"
    )]
    PicardNonConvergence {
        iterations: usize,
        last_diff: f64,
        history: Vec<f64>,
    },

    /// A comparison run was requested for rate sets that fail the ordering
    /// or monotonicity hypotheses on the audit grid.
    #[error("comparison hypotheses violated: {0}")]
    HypothesisViolation(String),
}

pub type Result<T> = std::result::Result<T, Error>;
