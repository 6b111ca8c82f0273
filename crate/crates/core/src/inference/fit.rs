//! The alternating estimation loop.

use nalgebra::DMatrix;

use super::design::{Factors, WarpedDesign};
use super::fixed::{em_with, gls_with, moments_all_with, FixedEffects};
use super::likelihood::{linearize_design, profile_with, Linearization};
use super::variance::estimate_variance;
use super::warps::predict_all;
use crate::data::DataSet;
use crate::error::{invalid, Result};
use crate::model::{ModelSpec, VarianceParams};
use crate::optim::BfgsOptions;
use crate::par::par_map;
use crate::warp::LatentWarp;

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub max_outer: usize,
    /// Stop when the criterion changes by less than this relative amount.
    pub rel_tol: f64,
    /// Run one EM update of the coefficients per outer iteration.
    pub em: bool,
    pub max_warp_iter: usize,
    pub variance: BfgsOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { max_outer: 5, rel_tol: 1e-4, em: false, max_warp_iter: 50, variance: BfgsOptions::default() }
    }
}

/// Estimated templates, variance parameters and predicted warps.
#[derive(Debug, Clone)]
pub struct FittedModel {
    /// Model structure with the estimated variance parameters (relative to `sigma2`).
    pub spec: ModelSpec,
    pub coefficients: Vec<DMatrix<f64>>,
    pub trained: Vec<bool>,
    pub sigma2: f64,
    pub latents: Vec<LatentWarp>,
    /// Profile criterion after each completed outer iteration.
    pub trace: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl FittedModel {
    pub fn params(&self) -> &VarianceParams {
        &self.spec.params
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    /// Variance parameters in data units.
    pub fn absolute_params(&self) -> VarianceParams {
        self.spec.params.absolute(self.sigma())
    }

    /// Template of subject `j` at time `t` (clamped to the basis domain).
    pub fn template(&self, j: usize, t: f64) -> Vec<f64> {
        let (lo, hi) = self.spec.basis.domain();
        let mut row = vec![0.0; self.spec.basis.len()];
        self.spec.basis.eval_into(t.clamp(lo, hi), &mut row);
        let c = &self.coefficients[j];
        (0..c.ncols()).map(|col| c.column(col).iter().zip(&row).map(|(a, b)| a * b).sum()).collect()
    }
}

struct State {
    params: VarianceParams,
    coefs: FixedEffects,
    latents: Vec<LatentWarp>,
    sigma2: f64,
    value: f64,
}

fn linearize_state(spec: &ModelSpec, data: &DataSet, latents: &[LatentWarp], coefs: &[DMatrix<f64>]) -> Result<Vec<Linearization>> {
    par_map(data.len(), |n| {
        let s = data.sample(n);
        let design = WarpedDesign::new(spec, s, &latents[n])?;
        Ok(linearize_design(s, &design, &coefs[s.subject], nalgebra::DVector::from_vec(latents[n].to_vec_padded(&spec.warp))))
    })
    .into_iter()
    .collect()
}

fn check_inputs(data: &DataSet, spec: &ModelSpec) -> Result<()> {
    spec.validate()?;
    if data.q() != spec.q() {
        return Err(invalid(format!("data have q = {}, model has q = {}", data.q(), spec.q())));
    }
    let (a, b) = spec.warp.domain();
    for s in data.samples() {
        if s.times()[0] < a || *s.times().last().unwrap() > b {
            return Err(invalid(format!("sample {} has times outside the warp domain [{a}, {b}]", s.id)));
        }
    }
    for j in 0..data.n_subjects() {
        if data.subject_samples(j).is_empty() {
            return Err(invalid(format!("subject {} has no samples", data.subjects()[j])));
        }
    }
    Ok(())
}

/// Alternate template estimation, warp prediction and variance estimation,
/// starting from identity warps and `spec.params`.
pub fn fit(data: &DataSet, spec: &ModelSpec, options: &FitOptions) -> Result<FittedModel> {
    check_inputs(data, spec)?;
    let mut warnings = Vec::new();
    let mut trace = Vec::new();
    let mut prev: Option<State> = None;
    let mut params = spec.params.clone();
    let mut latents: Vec<LatentWarp> = (0..data.len()).map(|_| LatentWarp::identity(&spec.warp)).collect();
    let mut converged = false;
    let mut outer = 0;
    while outer < options.max_outer {
        outer += 1;
        let factors = Factors::new(spec, &params, data)?;
        let mut coefs = gls_with(spec, data, &latents, &factors)?;
        warnings.append(&mut coefs.warnings);
        if options.em {
            let lins = linearize_state(spec, data, &latents, &coefs.coefficients)?;
            let sigma2 = profile_with(data, &lins, &factors)?.sigma2;
            let moments = moments_all_with(spec, sigma2, data, &latents, &coefs.coefficients, &factors)?;
            coefs = em_with(spec, data, &latents, &moments, &factors)?;
            warnings.append(&mut coefs.warnings);
        }
        let predictions = predict_all(spec, data, &coefs.coefficients, &factors, &latents, options.max_warp_iter)?;
        let stalled = predictions.iter().filter(|p| !p.converged).count();
        if stalled > 0 {
            warnings.push(format!("outer iteration {outer}: {stalled} warp predictions hit the iteration limit"));
        }
        latents = predictions.into_iter().map(|p| p.latent).collect();
        let lins = linearize_state(spec, data, &latents, &coefs.coefficients)?;
        let est = estimate_variance(&spec_with(spec, &params), &params, data, &lins, &options.variance)?;
        if let Some(w) = est.warning {
            warnings.push(format!("outer iteration {outer}: {w}"));
        }
        let state = State { params: est.params, coefs, latents: latents.clone(), sigma2: est.profile.sigma2, value: est.profile.value };
        if let Some(p) = &prev {
            if state.value > p.value + 1e-6 * p.value.abs() {
                warnings.push(format!(
                    "outer iteration {outer} increased the criterion ({:.6e} > {:.6e}); keeping the previous estimates",
                    state.value, p.value
                ));
                converged = true;
                break;
            }
            let change = (p.value - state.value).abs();
            trace.push(state.value);
            let done = change <= options.rel_tol * p.value.abs().max(1e-300);
            params = state.params.clone();
            prev = Some(state);
            if done {
                converged = true;
                break;
            }
        } else {
            trace.push(state.value);
            params = state.params.clone();
            prev = Some(state);
        }
    }
    let state = prev.ok_or_else(|| invalid("max_outer must be at least 1"))?;
    let mut out_spec = spec.clone();
    out_spec.params = state.params;
    Ok(FittedModel {
        spec: out_spec,
        coefficients: state.coefs.coefficients,
        trained: state.coefs.trained,
        sigma2: state.sigma2,
        latents: state.latents,
        outer_iterations: trace.len(),
        trace,
        converged,
        warnings,
    })
}

fn spec_with(spec: &ModelSpec, params: &VarianceParams) -> ModelSpec {
    let mut s = spec.clone();
    s.params = params.clone();
    s
}
