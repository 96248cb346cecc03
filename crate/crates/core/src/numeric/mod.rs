//! Shared numeric kernels: special functions, adaptive quadrature, and
//! scalar solvers. Nothing in here knows about densities or estimators.

pub mod quad;
pub mod solve;
pub mod special;
