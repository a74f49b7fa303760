//! Shared numerical machinery: root finding, quadrature, interpolation,
//! fixed-step integration, and small statistics helpers.

pub mod abm4;
pub mod brent;
pub mod quad;
pub mod regression;
pub mod spline;
