//! Quantiles and interpolation used by the profile and contour engines.

pub mod dist;
pub mod spline;

pub use dist::{f_quantile, t_quantile, DistError};
pub use spline::{CubicSpline, Interpolant, PeriodicCubicSpline, SplineError};
