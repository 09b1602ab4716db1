//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model construction, inference, and estimation.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// An emission or transition log-density evaluated to NaN or +inf.
    #[error("non-finite log-density at step {step}: {what}")]
    NonFiniteDensity { step: usize, what: String },
    /// Every regime had zero emission density at some step, so the filter
    /// cannot be renormalized. Signals mis-specified data or parameters.
    #[error("all emission densities vanish at step {step}")]
    DegenerateStep { step: usize },
    /// An input slice had the wrong length.
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },
    /// Path enumeration would exceed the configured guard.
    #[error("path enumeration too large: {regimes}^{steps} paths exceed {max}")]
    TooLarge {
        regimes: usize,
        steps: usize,
        max: u64,
    },
    /// A parameter vector violates its validity constraints.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    /// Weighted normal equations are rank-deficient beyond tolerance.
    #[error("singular weighted design matrix in regime {regime}")]
    SingularDesign { regime: usize },
    /// The reference regime's companion matrix has no full eigenbasis, so the
    /// transformed infinity norm is undefined. Spectral radii are still reported.
    #[error("companion matrix of basis regime {basis_regime} is defective")]
    DefectiveBasis {
        basis_regime: usize,
        spectral_radii: Vec<f64>,
    },
    /// Two parameter vectors cannot be compared componentwise.
    #[error("parameter shape mismatch: {0}")]
    ShapeMismatch(String),
    /// The covariance matrix is not positive definite.
    #[error("covariance matrix is singular or not positive definite")]
    SingularSigma,
    /// No weighted wet observation is available for the Gamma update.
    #[error("no weighted positive observations for the Gamma update")]
    NoWetData,
    /// Newton iteration on the Gamma shape equation failed to converge.
    #[error("Newton iteration for the Gamma shape did not converge after {iters} iterations")]
    NewtonDiverged { iters: usize },
    /// Every start of a multi-start fit failed.
    #[error("all {starts} starts failed; last error: {last}")]
    AllStartsFailed { starts: usize, last: String },
    /// Fit reports being compared were not produced on the same data.
    #[error("inconsistent data across fits: {0}")]
    InconsistentData(String),
}

pub type Result<T> = std::result::Result<T, Error>;
