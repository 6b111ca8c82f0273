//! Variance parameters by quasi-Newton minimization of the profile criterion.

use super::design::Factors;
use super::likelihood::{profile_with, Linearization, ProfileValue};
use crate::data::DataSet;
use crate::error::{invalid, Result};
use crate::model::{ModelSpec, VarianceParams};
use crate::optim::{minimize_bfgs, BfgsOptions};

#[derive(Debug, Clone)]
pub struct VarianceEstimate {
    pub params: VarianceParams,
    pub profile: ProfileValue,
    pub initial_value: f64,
    pub iterations: usize,
    pub warning: Option<String>,
}

fn objective(spec: &ModelSpec, init: &VarianceParams, data: &DataSet, lins: &[Linearization], x: &[f64]) -> f64 {
    let eval = || -> Result<f64> {
        let params = init.decode(&spec.warp, x)?;
        Ok(profile_with(data, lins, &Factors::new(spec, &params, data)?)?.value)
    };
    eval().unwrap_or(f64::INFINITY)
}

/// Minimize the profile criterion over the free variance parameters,
/// starting from `init`, with the samples linearized as in `lins`.
pub fn estimate_variance(
    spec: &ModelSpec,
    init: &VarianceParams,
    data: &DataSet,
    lins: &[Linearization],
    opts: &BfgsOptions,
) -> Result<VarianceEstimate> {
    if lins.len() != data.len() {
        return Err(invalid("one linearization per sample required"));
    }
    init.validate(&spec.warp)?;
    let x0 = init.encode(&spec.warp)?;
    let free = spec.free_mask();
    let initial = profile_with(data, lins, &Factors::new(spec, init, data)?)?;
    let result = minimize_bfgs(|x| objective(spec, init, data, lins, x), &x0, &free, opts);
    let mut warning = None;
    let (params, profile) = if result.f.is_finite() && result.f < initial.value {
        let params = init.decode(&spec.warp, &result.x)?;
        let profile = profile_with(data, lins, &Factors::new(spec, &params, data)?)?;
        if !result.converged {
            warning = Some(format!("variance estimation stopped after {} iterations", result.iterations));
        }
        (params, profile)
    } else {
        if !result.converged {
            warning = Some("variance estimation made no progress; keeping the initial parameters".into());
        }
        (init.clone(), initial)
    };
    Ok(VarianceEstimate { params, profile, initial_value: initial.value, iterations: result.iterations, warning })
}
