//! Confidence intervals, pairwise confidence regions and prediction
//! intervals for nonlinear regression models given as symbolic
//! expressions, using both the linear (delta-method) approximation and
//! likelihood profiles.
//!
//! The usual pipeline is
//!
//! 1. [`expr::parse`] the model text,
//! 2. [`model::parameterize`] it (numeric literals become parameters),
//! 3. [`fit::fit`] it to a [`Dataset`],
//! 4. profile every parameter with [`profile::profile_all`], then derive
//!    [`profile::profile_ci`], [`contour::profile_contour`] and
//!    [`profile::profile_prediction_interval`] from the traces.

pub mod contour;
pub mod dataset;
pub mod expr;
pub mod fit;
pub mod model;
pub mod numerics;
pub mod profile;

pub use dataset::{Dataset, DatasetError};
pub use expr::{parse, Expr, ExprError};
pub use fit::{fit, fit_with_fixed, linear_ci, linear_prediction, FitError, FitOptions, FitResult};
pub use model::{parameterize, reparameterize, ModelError, ParamModel, Reparameterization};
pub use profile::{profile_all, profile_ci, profile_parameter, ProfileError, ProfileOptions, ProfileSet, ProfileTrace};
pub use contour::{profile_contour, ContourCurve, ContourError};
