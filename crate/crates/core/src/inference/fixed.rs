//! Template coefficients: generalized least squares at fixed warps and the
//! EM update that integrates over the linearized warp uncertainty.

use nalgebra::{DMatrix, DVector};

use super::design::{Factors, WarpedDesign};
use super::likelihood::{linearize_design, moments_with, woodbury_terms};
use crate::data::DataSet;
use crate::error::{invalid, Result};
use crate::linalg::{neumaier_sum, CholFactor};
use crate::model::{ModelSpec, VarianceParams};
use crate::optim::solve_qp;
use crate::par::par_map;
use crate::splines::BasisMode;
use crate::warp::LatentWarp;

/// Coefficients per subject (`K x q`, one column per coordinate).
#[derive(Debug, Clone, PartialEq)]
pub struct FixedEffects {
    pub coefficients: Vec<DMatrix<f64>>,
    /// Subjects with at least one sample.
    pub trained: Vec<bool>,
    pub warnings: Vec<String>,
}

/// Normal equations of one sample: `(R' W R, R' W y)` in whitened form.
struct Normal {
    h: DMatrix<f64>,
    b: DVector<f64>,
}

fn solve_subject(spec: &ModelSpec, q: usize, h: DMatrix<f64>, b: DVector<f64>, subject: &str, warnings: &mut Vec<String>) -> Result<DMatrix<f64>> {
    let k = spec.basis.len();
    let n = h.nrows();
    let h = (&h + h.transpose()) * 0.5;
    let mut hh = h.clone();
    let x = loop {
        match CholFactor::new(hh.clone()) {
            Ok(c) if spec.basis.mode() == BasisMode::Standard => break c.solve(&b),
            Ok(_) => {
                let cols = spec.basis.monotone_columns();
                let rows: Vec<usize> = (0..q).flat_map(|j| cols.clone().map(move |c| j * k + c)).collect();
                let mut a = DMatrix::zeros(rows.len(), n);
                for (r, &i) in rows.iter().enumerate() {
                    a[(r, i)] = 1.0;
                }
                break solve_qp(&hh, &(-&b), &a, &DVector::zeros(rows.len()), &DVector::zeros(n))?.x;
            }
            Err(_) => {
                if hh != h {
                    return Err(crate::error::Error::Numerical(format!("normal equations of subject {subject} are singular")));
                }
                let ridge = 1e-8 * (h.trace() / n as f64).max(1e-300);
                warnings.push(format!("subject {subject}: rank-deficient design, added ridge {ridge:.3e}"));
                hh = &h + DMatrix::identity(n, n) * ridge;
            }
        }
    };
    Ok(DMatrix::from_column_slice(k, q, x.as_slice()))
}

fn assemble(spec: &ModelSpec, data: &DataSet, normals: Vec<Normal>) -> Result<FixedEffects> {
    let q = data.q();
    let dim = spec.basis.len() * q;
    let mut coefficients = Vec::with_capacity(data.n_subjects());
    let mut trained = Vec::with_capacity(data.n_subjects());
    let mut warnings = Vec::new();
    for j in 0..data.n_subjects() {
        let members = data.subject_samples(j);
        if members.is_empty() {
            warnings.push(format!("subject {} has no samples; template left at zero", data.subjects()[j]));
            coefficients.push(DMatrix::zeros(spec.basis.len(), q));
            trained.push(false);
            continue;
        }
        let mut h = DMatrix::zeros(dim, dim);
        let mut b = DVector::zeros(dim);
        for &n in &members {
            h += &normals[n].h;
            b += &normals[n].b;
        }
        coefficients.push(solve_subject(spec, q, h, b, &data.subjects()[j], &mut warnings)?);
        trained.push(true);
    }
    Ok(FixedEffects { coefficients, trained, warnings })
}

pub(crate) fn gls_with(spec: &ModelSpec, data: &DataSet, latents: &[LatentWarp], factors: &Factors) -> Result<FixedEffects> {
    let normals = par_map(data.len(), |n| -> Result<Normal> {
        let s = data.sample(n);
        let design = WarpedDesign::new(spec, s, &latents[n])?;
        let sigma = &factors.sigma[data.pattern(n)];
        let r = sigma.whiten_mat(&design.mean_design(s.observed()));
        let y = sigma.whiten(&s.y_obs());
        Ok(Normal { h: r.transpose() * &r, b: r.transpose() * y })
    });
    assemble(spec, data, normals.into_iter().collect::<Result<Vec<_>>>()?)
}

/// Per-subject generalized least squares with the samples warped by `latents`.
pub fn fit_fixed_effects_gls(spec: &ModelSpec, params: &VarianceParams, data: &DataSet, latents: &[LatentWarp]) -> Result<FixedEffects> {
    if latents.len() != data.len() {
        return Err(invalid("one latent warp per sample required"));
    }
    gls_with(spec, data, latents, &Factors::new(spec, params, data)?)
}

/// Conditional moments of every sample's latent vector, linearized at
/// `latents` with the current coefficients.
pub fn all_moments(
    spec: &ModelSpec,
    params: &VarianceParams,
    sigma2: f64,
    data: &DataSet,
    latents: &[LatentWarp],
    coefs: &[DMatrix<f64>],
) -> Result<Vec<(DVector<f64>, DMatrix<f64>)>> {
    let factors = Factors::new(spec, params, data)?;
    moments_all_with(spec, sigma2, data, latents, coefs, &factors)
}

pub(crate) fn moments_all_with(
    spec: &ModelSpec,
    sigma2: f64,
    data: &DataSet,
    latents: &[LatentWarp],
    coefs: &[DMatrix<f64>],
    factors: &Factors,
) -> Result<Vec<(DVector<f64>, DMatrix<f64>)>> {
    par_map(data.len(), |n| {
        let s = data.sample(n);
        let design = WarpedDesign::new(spec, s, &latents[n])?;
        let lin = linearize_design(s, &design, &coefs[s.subject], DVector::from_vec(latents[n].to_vec_padded(&spec.warp)));
        moments_with(&lin, &factors.sigma[data.pattern(n)], &factors.c_chol, sigma2)
    })
    .into_iter()
    .collect()
}

/// One M-step for the coefficients given the conditional moments
/// `(mean, cov)` of each sample's latent vector, linearized at `latents`.
pub fn em_update_coefficients(
    spec: &ModelSpec,
    params: &VarianceParams,
    data: &DataSet,
    latents: &[LatentWarp],
    moments: &[(DVector<f64>, DMatrix<f64>)],
) -> Result<FixedEffects> {
    if latents.len() != data.len() || moments.len() != data.len() {
        return Err(invalid("one latent warp and one moment pair per sample required"));
    }
    let factors = Factors::new(spec, params, data)?;
    em_with(spec, data, latents, moments, &factors)
}

pub(crate) fn em_with(
    spec: &ModelSpec,
    data: &DataSet,
    latents: &[LatentWarp],
    moments: &[(DVector<f64>, DMatrix<f64>)],
    factors: &Factors,
) -> Result<FixedEffects> {
    let p = spec.warp.latent_dim();
    let normals = par_map(data.len(), |n| -> Result<Normal> {
        let s = data.sample(n);
        let obs = s.observed();
        let design = WarpedDesign::new(spec, s, &latents[n])?;
        let sigma = &factors.sigma[data.pattern(n)];
        let w0 = latents[n].to_vec_padded(&spec.warp);
        let (mean, cov) = &moments[n];
        let rl: Vec<DMatrix<f64>> = (0..p).map(|l| sigma.whiten_mat(&design.mean_design_deriv(l, obs))).collect();
        let mut k = sigma.whiten_mat(&design.mean_design(obs));
        for l in 0..p {
            k += &rl[l] * (mean[l] - w0[l]);
        }
        let mut h = k.transpose() * &k;
        for l1 in 0..p {
            for l2 in 0..p {
                if cov[(l1, l2)] != 0.0 {
                    h += rl[l1].transpose() * &rl[l2] * cov[(l1, l2)];
                }
            }
        }
        let b = k.transpose() * sigma.whiten(&s.y_obs());
        Ok(Normal { h, b })
    });
    assemble(spec, data, normals.into_iter().collect::<Result<Vec<_>>>()?)
}

/// `-2` log-likelihood of the linearized model at fixed variance parameters
/// and `sigma2` (constants dropped), as a function of the coefficients:
/// `sum_n r_n' V_n^{-1} r_n / sigma2 + log det V_n`.
pub fn linearized_criterion(
    spec: &ModelSpec,
    params: &VarianceParams,
    sigma2: f64,
    data: &DataSet,
    latents: &[LatentWarp],
    coefs: &[DMatrix<f64>],
) -> Result<f64> {
    let factors = Factors::new(spec, params, data)?;
    let terms = par_map(data.len(), |n| {
        let s = data.sample(n);
        let design = WarpedDesign::new(spec, s, &latents[n])?;
        let lin = linearize_design(s, &design, &coefs[s.subject], DVector::from_vec(latents[n].to_vec_padded(&spec.warp)));
        woodbury_terms(&lin, &factors.sigma[data.pattern(n)], &factors.c_chol)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(neumaier_sum(terms.iter().map(|(quad, logdet)| quad / sigma2 + logdet)))
}
