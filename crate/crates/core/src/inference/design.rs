//! Basis evaluations at warped times and the covariance factors shared by
//! all likelihood computations.

use nalgebra::{DMatrix, DVector};

use crate::data::{DataSet, FunctionalSample};
use crate::error::{invalid, Result};
use crate::linalg::CholFactor;
use crate::model::{ModelSpec, VarianceParams};
use crate::warp::LatentWarp;

/// Basis values, basis derivatives and warp gradients at the warped sample times.
#[derive(Debug, Clone)]
pub(crate) struct WarpedDesign {
    /// `m x K` basis values at the (clamped) warped times.
    pub f: DMatrix<f64>,
    /// `m x K` basis derivatives; zero where the warped time was clamped.
    pub fd: DMatrix<f64>,
    /// `m x p` gradients of the warp with respect to the latent vector.
    pub grads: DMatrix<f64>,
    q: usize,
}

impl WarpedDesign {
    pub fn new(spec: &ModelSpec, sample: &FunctionalSample, latent: &LatentWarp) -> Result<Self> {
        let curve = spec.warp.curve(latent)?;
        let basis = &spec.basis;
        let (lo, hi) = basis.domain();
        let m = sample.m();
        let k = basis.len();
        let p = spec.warp.latent_dim();
        let mut f = DMatrix::zeros(m, k);
        let mut fd = DMatrix::zeros(m, k);
        let mut grads = DMatrix::zeros(m, p);
        let mut row = vec![0.0; k];
        let mut g = vec![0.0; p];
        for (i, &t) in sample.times().iter().enumerate() {
            let v = curve.eval(t);
            if !v.is_finite() {
                return Err(invalid("non-finite warped time"));
            }
            let vc = v.clamp(lo, hi);
            basis.eval_into(vc, &mut row);
            f.row_mut(i).copy_from_slice(&row);
            if v == vc && basis.degree() + usize::from(basis.mode() == crate::splines::BasisMode::Increasing) >= 1 {
                basis.deriv_into(vc, &mut row);
                fd.row_mut(i).copy_from_slice(&row);
            }
            curve.grad_into(t, &mut g);
            grads.row_mut(i).copy_from_slice(&g);
        }
        Ok(Self { f, fd, grads, q: sample.q() })
    }

    /// Mean vector `theta(v(t_k))` at the observed entries.
    pub fn gamma(&self, coef: &DMatrix<f64>, observed: &[usize]) -> DVector<f64> {
        let vals = &self.f * coef;
        DVector::from_iterator(observed.len(), observed.iter().map(|&i| vals[(i / self.q, i % self.q)]))
    }

    /// Jacobian of [`gamma`](Self::gamma) with respect to the latent vector.
    pub fn jacobian(&self, coef: &DMatrix<f64>, observed: &[usize]) -> DMatrix<f64> {
        let slopes = &self.fd * coef;
        let p = self.grads.ncols();
        let mut z = DMatrix::zeros(observed.len(), p);
        for (r, &i) in observed.iter().enumerate() {
            let (k, j) = (i / self.q, i % self.q);
            let d = slopes[(k, j)];
            for l in 0..p {
                z[(r, l)] = d * self.grads[(k, l)];
            }
        }
        z
    }

    /// Design matrix of the stacked coefficients (coordinate-major blocks of
    /// `K` columns): `gamma = R vec(coef)`.
    pub fn mean_design(&self, observed: &[usize]) -> DMatrix<f64> {
        self.block_design(&self.f, None, observed)
    }

    /// `d R / d w_l`, so that column `l` of the Jacobian is `R_l vec(coef)`.
    pub fn mean_design_deriv(&self, l: usize, observed: &[usize]) -> DMatrix<f64> {
        self.block_design(&self.fd, Some(l), observed)
    }

    fn block_design(&self, src: &DMatrix<f64>, grad: Option<usize>, observed: &[usize]) -> DMatrix<f64> {
        let kk = src.ncols();
        let mut r = DMatrix::zeros(observed.len(), kk * self.q);
        for (row, &i) in observed.iter().enumerate() {
            let (k, j) = (i / self.q, i % self.q);
            let scale = grad.map_or(1.0, |l| self.grads[(k, l)]);
            for c in 0..kk {
                r[(row, j * kk + c)] = src[(k, c)] * scale;
            }
        }
        r
    }
}

/// Normalized position of sample times within the warp domain, where the
/// amplitude kernel is defined on the unit interval.
pub(crate) fn unit_times(spec: &ModelSpec, times: &[f64]) -> Vec<f64> {
    let (a, b) = spec.warp.domain();
    times.iter().map(|t| ((t - a) / (b - a)).clamp(0.0, 1.0)).collect()
}

/// `S_n + diag(rho)` restricted to the observed entries of `sample`.
pub(crate) fn residual_cov(spec: &ModelSpec, params: &VarianceParams, sample: &FunctionalSample) -> DMatrix<f64> {
    let s = params.amplitude.block_cov(&unit_times(spec, sample.times()));
    let obs = sample.observed();
    let q = sample.q();
    let rho = params.noise.rho();
    DMatrix::from_fn(obs.len(), obs.len(), |a, b| {
        let v = s[(obs[a], obs[b])];
        if a == b {
            v + rho[obs[a] % q]
        } else {
            v
        }
    })
}

/// Cholesky factors of the residual covariance (one per sample pattern) and
/// of the latent warp covariance.
#[derive(Debug, Clone)]
pub(crate) struct Factors {
    pub sigma: Vec<CholFactor>,
    pub c_chol: CholFactor,
}

impl Factors {
    pub fn new(spec: &ModelSpec, params: &VarianceParams, data: &DataSet) -> Result<Self> {
        let sigma = (0..data.n_patterns())
            .map(|p| CholFactor::new(residual_cov(spec, params, data.pattern_representative(p))))
            .collect::<Result<Vec<_>>>()?;
        let c_chol = CholFactor::new(params.warp_matrix(&spec.warp))?;
        Ok(Self { sigma, c_chol })
    }

    /// Factors for a single sample.
    pub fn for_sample(spec: &ModelSpec, params: &VarianceParams, sample: &FunctionalSample) -> Result<Self> {
        Ok(Self {
            sigma: vec![CholFactor::new(residual_cov(spec, params, sample))?],
            c_chol: CholFactor::new(params.warp_matrix(&spec.warp))?,
        })
    }
}
