//! Forward simulation from the generative model.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::covariance::{AmplitudeModel, NoiseModel};
use crate::data::{DataSet, FunctionalSample};
use crate::error::{invalid, Error, Result};
use crate::linalg::cholesky_jittered;
use crate::splines::SplineBasis;
use crate::warp::{LatentWarp, WarpCovariance, WarpModel, WarpSampler};

/// Everything needed to draw a synthetic data set. Variances are in data
/// units; `None` switches a component off.
#[derive(Debug, Clone)]
pub struct SimulationSpec {
    pub basis: SplineBasis,
    pub warp: WarpModel,
    pub warp_cov: Option<WarpCovariance>,
    pub amplitude: Option<AmplitudeModel>,
    pub noise: NoiseModel,
    /// Noise standard deviation of the first coordinate.
    pub noise_sd: f64,
    /// Template coefficients per subject (`K x q`).
    pub templates: Vec<DMatrix<f64>>,
    pub samples_per_subject: usize,
    /// Common observation grid inside the warp domain.
    pub grid: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub data: DataSet,
    /// True latent warps, one per sample.
    pub latents: Vec<LatentWarp>,
}

fn template_value(basis: &SplineBasis, coef: &DMatrix<f64>, v: f64, row: &mut [f64]) -> DVector<f64> {
    let (lo, hi) = basis.domain();
    basis.eval_into(v.clamp(lo, hi), row);
    coef.transpose() * DVector::from_column_slice(row)
}

/// Draw `samples_per_subject` curves per subject. Samples are ordered by
/// subject, then repetition, and named `s<subject>_<rep>`.
pub fn simulate(spec: &SimulationSpec) -> Result<SimulatedData> {
    let q = spec.noise.q();
    if spec.templates.is_empty() || spec.samples_per_subject == 0 || spec.grid.is_empty() {
        return Err(invalid("simulation needs templates, samples and a grid"));
    }
    if spec.templates.iter().any(|c| c.nrows() != spec.basis.len() || c.ncols() != q) {
        return Err(invalid(format!("templates must be {}x{q}", spec.basis.len())));
    }
    if !(spec.noise_sd >= 0.0 && spec.noise_sd.is_finite()) {
        return Err(invalid("noise standard deviation must be non-negative"));
    }
    let (a, b) = spec.warp.domain();
    if spec.grid.windows(2).any(|w| w[0] >= w[1]) || spec.grid[0] < a || *spec.grid.last().unwrap() > b {
        return Err(invalid("grid must be increasing and inside the warp domain"));
    }
    let m = spec.grid.len();
    let sampler = match &spec.warp_cov {
        Some(c) => {
            c.validate(&spec.warp)?;
            Some(WarpSampler::new(&spec.warp, &c.matrix(&spec.warp))?)
        }
        None => None,
    };
    let amp_factor = match &spec.amplitude {
        Some(amp) => {
            if amp.q() != q {
                return Err(invalid("amplitude and noise dimensions differ"));
            }
            let unit: Vec<f64> = spec.grid.iter().map(|t| (t - a) / (b - a)).collect();
            let s = amp.block_cov(&unit);
            let (chol, _) = cholesky_jittered(&s, 1e-10, 1e-6)
                .map_err(|e| Error::Numerical(format!("amplitude covariance: {e}")))?;
            Some(chol.l().clone())
        }
        None => None,
    };
    let noise_sd: Vec<f64> = spec.noise.rho().iter().map(|r| spec.noise_sd * r.sqrt()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut row = vec![0.0; spec.basis.len()];
    let mut samples = Vec::new();
    let mut latents = Vec::new();
    for (j, coef) in spec.templates.iter().enumerate() {
        for rep in 0..spec.samples_per_subject {
            let latent = match &sampler {
                Some(s) => s.draw(&mut rng)?,
                None => LatentWarp::identity(&spec.warp),
            };
            let curve = spec.warp.curve(&latent)?;
            let mut values = vec![0.0; m * q];
            for (k, &t) in spec.grid.iter().enumerate() {
                let mean = template_value(&spec.basis, coef, curve.eval(t), &mut row);
                values[k * q..(k + 1) * q].copy_from_slice(mean.as_slice());
            }
            if let Some(l) = &amp_factor {
                let z = DVector::from_iterator(m * q, (0..m * q).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let x = l * z;
                values.iter_mut().zip(x.iter()).for_each(|(v, xi)| *v += xi);
            }
            if spec.noise_sd > 0.0 {
                for (i, v) in values.iter_mut().enumerate() {
                    *v += noise_sd[i % q] * rng.sample::<f64, _>(StandardNormal);
                }
            }
            samples.push(FunctionalSample::new(format!("s{j}_{rep}"), j, spec.grid.clone(), q, values)?);
            latents.push(latent);
        }
    }
    let data = DataSet::with_subject_count(samples, spec.templates.len())?;
    Ok(SimulatedData { data, latents })
}

/// Apply a template to a time (clamped to the basis domain).
pub fn eval_template(basis: &SplineBasis, coef: &DMatrix<f64>, t: f64) -> Vec<f64> {
    let mut row = vec![0.0; basis.len()];
    template_value(basis, coef, t, &mut row).iter().copied().collect()
}
