//! Crate error type.
//!
//! Every fallible operation in the crate funnels into [`Error`]. Variants are
//! grouped by what the caller can do about them: reject the input (invalid /
//! degenerate data), widen the request (argument, coverage, support), or
//! inspect a partial result (non-convergence, which carries the best iterate
//! found so far).

use crate::lcmle;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A piecewise-linear log-density failed validation (knots not strictly
    /// increasing, non-finite values, slopes increasing, non-normalizable).
    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    /// A weighted sample failed validation (non-finite points, negative
    /// weights, zero total weight).
    #[error("invalid sample: {0}")]
    InvalidSample(String),

    /// The sample carries fewer than two distinct support points, so no
    /// log-concave density maximizes the likelihood.
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// The iterative fit stopped before meeting its optimality certificate.
    /// The best iterate found is attached so callers can inspect it.
    #[error(
        "fit did not converge after {iterations} iterations \
         (worst optimality violation {certificate:.3e})"
    )]
    FitDidNotConverge {
        iterations: usize,
        certificate: f64,
        best: Box<lcmle::Fit>,
    },

    /// An argument was outside the range the operation is defined on.
    #[error("argument out of range: {0}")]
    Argument(String),

    /// The requested window does not cover enough probability mass.
    #[error("window coverage too small: {0}")]
    Coverage(String),

    /// Adaptive quadrature could not meet its error target.
    #[error("quadrature failed: {0}")]
    Quadrature(String),

    /// A geometric-mean symmetrization has empty support because the center
    /// sits at or outside the sample range.
    #[error("empty support: {0}")]
    SupportEmpty(String),

    /// A plug-in Fisher information came out (numerically) zero, so the
    /// one-step correction is undefined.
    #[error("degenerate information: {0}")]
    DegenerateInformation(String),

    /// A smoothing bandwidth requires a finite second moment the reference
    /// density does not have.
    #[error("infinite moment: {0}")]
    InfiniteMoment(String),
}
