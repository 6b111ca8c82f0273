//! Estimation engine: MAP warp prediction, local linearization, profile
//! likelihood for the variance parameters, template estimation (GLS and EM)
//! and the alternating fit.

mod design;
mod fit;
mod fixed;
mod likelihood;
mod variance;
mod warps;

pub use fit::{fit, FitOptions, FittedModel};
pub use fixed::{all_moments, em_update_coefficients, fit_fixed_effects_gls, linearized_criterion, FixedEffects};
pub use likelihood::{
    conditional_warp_moments, linearize, linearize_all, neg_log_posterior, profile_nll, Linearization, ProfileValue, PENALTY,
};
pub use variance::{estimate_variance, VarianceEstimate};
pub use warps::{predict_warp, WarpPrediction};

pub(crate) use design::Factors;
pub(crate) use warps::predict_with;

#[cfg(test)]
mod tests;
