//! Simultaneous maximum-likelihood inference for misaligned multivariate
//! functional data.
//!
//! Each observed curve `y_n : [0,1] -> R^q` is modelled as a subject template
//! evaluated in warped time plus a Gaussian amplitude process and white noise:
//!
//! ```text
//! y_n(t) = theta_{f(n)}(v(t, w_n)) + x_n(t) + eps_n(t)
//! ```
//!
//! The warp `v(t, w) = t + s + E_w(t)` is the identity plus a monotone cubic
//! interpolation of latent Gaussian anchor deviations `w`, and the amplitude
//! process may carry a time-varying cross-covariance built from interpolated
//! anchor matrices. Estimation alternates template fitting, MAP warp
//! prediction and profile-likelihood estimation of the variance parameters
//! in the model linearized around the predicted warps.
//!
//! Module map:
//!
//! * [`splines`]: B-spline bases and Hyman-filtered monotone interpolation.
//! * [`warp`]: random warping functions, gradients and simulation.
//! * [`covariance`]: temporal kernels, dynamic cross-covariance, encodings.
//! * [`inference`]: posterior, linearization, profile likelihood, fitting.
//! * [`tasks`]: simulation, classification and cross-validation.

pub mod covariance;
pub mod data;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod model;
pub mod optim;
mod par;
pub mod splines;
pub mod tasks;
pub mod warp;

pub use covariance::{AmplitudeModel, AmplitudeVariant, CrossCovAnchors, NoiseModel, TemporalKernel};
pub use data::{DataSet, FunctionalSample};
pub use error::{Error, Result};
pub use inference::{fit, FitOptions, FittedModel};
pub use model::{ModelSpec, VarianceParams};
pub use splines::{BasisMode, BoundaryRule, MonotoneInterpolant, SplineBasis};
pub use warp::{LatentWarp, WarpCovFamily, WarpCovariance, WarpModel};
