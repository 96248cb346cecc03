//! Estimation of the center of symmetry of a log-concave density.
//!
//! The crate is organised around a weighted log-concave maximum-likelihood
//! engine ([`lcmle`]) operating on piecewise-linear concave log-densities
//! ([`plcurve`]). On top of it sit the symmetric profile MLE ([`symmle`]),
//! one-step location estimators with truncated Fisher-information plug-ins
//! ([`onestep`]), and a set of analytic reference distributions with their
//! log-concave projections ([`refdist`]) used to calibrate and benchmark the
//! estimators.
//!
//! All fitting routines are deterministic: given the same sample they return
//! the same result, and samplers are seeded explicitly.

pub mod error;
pub mod lcmle;
pub mod numeric;
pub mod onestep;
pub mod plcurve;
pub mod refdist;
pub mod symmle;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
