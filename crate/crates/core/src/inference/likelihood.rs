//! Posterior criterion, local linearization, profile likelihood and the
//! conditional moments of the latent warps in the linearized model.

use nalgebra::{DMatrix, DVector};

use super::design::{residual_cov, Factors, WarpedDesign};
use crate::data::{DataSet, FunctionalSample};
use crate::error::{invalid, Result};
use crate::linalg::{neumaier_sum, CholFactor};
use crate::model::{ModelSpec, VarianceParams};
use crate::par::par_map;
use crate::warp::LatentWarp;

/// Value returned by [`profile_nll`] when a covariance matrix cannot be factorized.
pub const PENALTY: f64 = 1e100;

pub(crate) fn posterior_value(
    sample: &FunctionalSample,
    design: &WarpedDesign,
    coef: &DMatrix<f64>,
    sigma: &CholFactor,
    c_chol: &CholFactor,
    latent: &DVector<f64>,
) -> f64 {
    let r = design.gamma(coef, sample.observed()) - sample.y_obs();
    sigma.whiten(&r).norm_squared() + c_chol.whiten(latent).norm_squared()
}

/// Negative log posterior of one sample (up to `sigma^2` scaling and constants):
/// `(gamma_w - y)' (S_n + diag rho)^{-1} (gamma_w - y) + w' C^{-1} w`.
pub fn neg_log_posterior(
    spec: &ModelSpec,
    params: &VarianceParams,
    sample: &FunctionalSample,
    latent: &LatentWarp,
    coef: &DMatrix<f64>,
) -> Result<f64> {
    check_coef(spec, sample, coef)?;
    let f = Factors::for_sample(spec, params, sample)?;
    let design = WarpedDesign::new(spec, sample, latent)?;
    let w = DVector::from_vec(latent.to_vec_padded(&spec.warp));
    Ok(posterior_value(sample, &design, coef, &f.sigma[0], &f.c_chol, &w))
}

pub(crate) fn check_coef(spec: &ModelSpec, sample: &FunctionalSample, coef: &DMatrix<f64>) -> Result<()> {
    if coef.nrows() != spec.basis.len() || coef.ncols() != sample.q() {
        return Err(invalid(format!(
            "coefficients are {}x{}, expected {}x{}",
            coef.nrows(),
            coef.ncols(),
            spec.basis.len(),
            sample.q()
        )));
    }
    Ok(())
}

/// First-order expansion of the mean around a latent warp.
#[derive(Debug, Clone)]
pub struct Linearization {
    /// Mean at the expansion point, observed entries only.
    pub gamma0: DVector<f64>,
    /// Jacobian of the mean with respect to the latent vector.
    pub z: DMatrix<f64>,
    /// Expansion point (latent vector including shift).
    pub w0: DVector<f64>,
    /// Observed values.
    pub y: DVector<f64>,
}

impl Linearization {
    /// Working residual `y - gamma0 + Z w0`.
    pub fn residual(&self) -> DVector<f64> {
        &self.y - &self.gamma0 + &self.z * &self.w0
    }

    /// `V_n = Z C Z' + S_n + diag(rho)` (dense; for inspection and tests).
    pub fn total_cov(&self, spec: &ModelSpec, params: &VarianceParams, sample: &FunctionalSample) -> DMatrix<f64> {
        let c = params.warp_matrix(&spec.warp);
        &self.z * c * self.z.transpose() + residual_cov(spec, params, sample)
    }
}

pub(crate) fn linearize_design(sample: &FunctionalSample, design: &WarpedDesign, coef: &DMatrix<f64>, w0: DVector<f64>) -> Linearization {
    let obs = sample.observed();
    Linearization { gamma0: design.gamma(coef, obs), z: design.jacobian(coef, obs), w0, y: sample.y_obs() }
}

/// Linearize the mean of `sample` around `latent`.
pub fn linearize(spec: &ModelSpec, sample: &FunctionalSample, latent: &LatentWarp, coef: &DMatrix<f64>) -> Result<Linearization> {
    check_coef(spec, sample, coef)?;
    let design = WarpedDesign::new(spec, sample, latent)?;
    Ok(linearize_design(sample, &design, coef, DVector::from_vec(latent.to_vec_padded(&spec.warp))))
}

/// Linearizations of every sample around the given latents.
pub fn linearize_all(spec: &ModelSpec, data: &DataSet, latents: &[LatentWarp], coefs: &[DMatrix<f64>]) -> Result<Vec<Linearization>> {
    if latents.len() != data.len() {
        return Err(invalid("one latent warp per sample required"));
    }
    par_map(data.len(), |n| {
        let s = data.sample(n);
        linearize(spec, s, &latents[n], &coefs[s.subject])
    })
    .into_iter()
    .collect()
}

/// Quadratic form `r' V^{-1} r` and `log det V` for one sample via the
/// Woodbury identity, with `V = Sigma + Z C Z'`.
pub(crate) fn woodbury_terms(lin: &Linearization, sigma: &CholFactor, c_chol: &CholFactor) -> Result<(f64, f64)> {
    let r = sigma.whiten(&lin.residual());
    let u = sigma.whiten_mat(&lin.z) * c_chol.l();
    let p = u.ncols();
    let g = DMatrix::identity(p, p) + u.transpose() * &u;
    let gc = CholFactor::new(g)?;
    let proj = gc.whiten(&(u.transpose() * &r));
    Ok((r.norm_squared() - proj.norm_squared(), sigma.log_det() + gc.log_det()))
}

/// Value of the profiled criterion together with the profiled `sigma^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileValue {
    pub value: f64,
    pub sigma2: f64,
}

pub(crate) fn profile_with(data: &DataSet, lins: &[Linearization], factors: &Factors) -> Result<ProfileValue> {
    let terms = par_map(data.len(), |n| woodbury_terms(&lins[n], &factors.sigma[data.pattern(n)], &factors.c_chol));
    let terms = terms.into_iter().collect::<Result<Vec<_>>>()?;
    let total = data.n_obs() as f64;
    let quad = neumaier_sum(terms.iter().map(|t| t.0));
    let logdet = neumaier_sum(terms.iter().map(|t| t.1));
    let sigma2 = (quad / total).max(f64::MIN_POSITIVE);
    Ok(ProfileValue { value: total * sigma2.ln() + logdet + total, sigma2 })
}

/// Twice the negative profile log-likelihood of the linearized model,
/// `sum_n (M_n log s2 + log det V_n) + M` with `s2 = sum_n r_n' V_n^{-1} r_n / M`.
/// Returns [`PENALTY`] if a covariance cannot be factorized.
pub fn profile_nll(spec: &ModelSpec, params: &VarianceParams, data: &DataSet, lins: &[Linearization]) -> Result<ProfileValue> {
    if lins.len() != data.len() {
        return Err(invalid("one linearization per sample required"));
    }
    params.validate(&spec.warp)?;
    let eval = || profile_with(data, lins, &Factors::new(spec, params, data)?);
    Ok(eval().unwrap_or(ProfileValue { value: PENALTY, sigma2: f64::NAN }))
}

/// Conditional mean and covariance of the latent vector given the data in
/// the linearized model with residual variance `sigma2`.
pub fn conditional_warp_moments(
    spec: &ModelSpec,
    params: &VarianceParams,
    sample: &FunctionalSample,
    lin: &Linearization,
    sigma2: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let f = Factors::for_sample(spec, params, sample)?;
    moments_with(lin, &f.sigma[0], &f.c_chol, sigma2)
}

pub(crate) fn moments_with(lin: &Linearization, sigma: &CholFactor, c_chol: &CholFactor, sigma2: f64) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let zt = sigma.whiten_mat(&lin.z);
    let rt = sigma.whiten(&lin.residual());
    let precision = zt.transpose() * &zt + c_chol.inverse();
    let pc = CholFactor::new((&precision + precision.transpose()) * 0.5)?;
    let mean = pc.solve(&(zt.transpose() * rt));
    let cov = pc.inverse() * sigma2;
    Ok((mean, (&cov + cov.transpose()) * 0.5))
}
