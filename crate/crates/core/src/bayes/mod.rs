//! Posterior models for the reward and constraint metrics.
//!
//! * [`GaussianLinearPosterior`]: conjugate Bayesian ridge regression, used
//!   for Thompson draws and for UCB/LCB bounds over confidence ellipsoids.
//! * [`ConfidenceRadius`]: the ellipsoid radius `β_t`.
//! * [`LaplaceLogisticPosterior`]: Gaussian approximation for Bernoulli
//!   outcomes such as upload success.
//!
//! Reward and constraint are modelled independently; a joint model would
//! slot in as another [`crate::policies::MetricModel`] variant.

mod gaussian;
mod laplace;
mod radius;

pub use gaussian::GaussianLinearPosterior;
pub use laplace::{logistic, softplus, FitReport, LaplaceLogisticPosterior};
pub use radius::ConfidenceRadius;
