//! Finite-regime Markov-switching autoregressions with observation-driven
//! (non-homogeneous) transitions.
//!
//! The crate is organized around a small engine and two concrete model
//! families:
//!
//! * [`model::RegimeModel`] — the contract a concrete model fulfills:
//!   transition and emission log-densities over a finite regime set, both
//!   conditioned on a window of lagged observations.
//! * [`filter`] / [`smooth`] / [`simulate`] — log-space forward filtering
//!   with exact likelihood evaluation, backward smoothing, trajectory
//!   simulation, and a filter-forgetting diagnostic.
//! * [`gaussian_ar`] — Gaussian linear autoregressions per regime with
//!   logistic observation-driven switching, the threshold (SETAR) limit,
//!   companion-matrix stability diagnostics, and EM M-steps.
//! * [`rainfall`] — a multi-station precipitation model: Gaussian-kernel
//!   transitions driven by exogenous covariates and Bernoulli-Gamma
//!   emissions.
//! * [`estimation`] — EM driver with multi-start, AIC/BIC model comparison,
//!   parametric bootstrap intervals, and a simulation-based consistency
//!   experiment.

pub mod error;
pub mod estimation;
pub mod filter;
pub mod gaussian_ar;
pub mod linalg;
pub mod math;
pub mod model;
pub mod optim;
pub mod rainfall;
pub mod simulate;
pub mod smooth;

pub use error::{Error, Result};
pub use filter::{
    attained_transition_bounds, brute_force_loglik, filter_forgetting, forward_filter,
    FilterResult, ForgettingResult,
};
pub use model::{RegimeModel, SampleModel};
pub use simulate::{simulate, Trajectory};
pub use smooth::{backward_smooth, SmoothResult};
