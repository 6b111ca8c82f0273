//! Plain-Rust core of the browser demo; the bindings in `lib.rs` only
//! convert errors.

use nalgebra::DMatrix;
use simm::covariance::{AmplitudeModel, NoiseModel, TemporalKernel};
use simm::tasks::{align_sample, mean_cross_sectional_variance, simulate, SimulationSpec};
use simm::warp::simulate_warps;
use simm::{fit, BasisMode, BoundaryRule, FitOptions, FittedModel, ModelSpec, Result, SplineBasis, VarianceParams, WarpCovariance, WarpModel};

/// Equidistant grid of `n >= 2` points on the unit interval.
pub fn unit_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
}

/// Warp functions `v(t)` of `count` random draws on a grid, concatenated.
/// Bridge warps keep both end points; motion warps leave the right end free.
pub fn warp_draws(seed: u64, count: usize, tau: f64, anchors: usize, bridge: bool, grid_points: usize) -> Result<Vec<f64>> {
    let (rule, cov) = if bridge {
        (BoundaryRule::FixedBothEnds, WarpCovariance::bridge(tau))
    } else {
        (BoundaryRule::ExtrapolateRight, WarpCovariance::motion(tau))
    };
    let model = WarpModel::new(anchors, (0.0, 1.0), rule, false)?;
    let grid = unit_grid(grid_points.max(2));
    let mut out = Vec::with_capacity(count * grid.len());
    for latent in simulate_warps(&model, &cov, count, seed)? {
        let curve = model.curve(&latent)?;
        out.extend(grid.iter().map(|&t| curve.eval(t)));
    }
    Ok(out)
}

/// Matérn correlation at the given lags.
pub fn matern_curve(alpha: f64, kappa: f64, lags: &[f64]) -> Result<Vec<f64>> {
    let k = TemporalKernel::Matern { alpha, kappa };
    k.validate()?;
    Ok(lags.iter().map(|&d| k.eval(0.0, d.abs())).collect())
}

const TEMPLATE: [f64; 10] = [0.0, 0.2, 1.4, 2.0, 0.4, -0.9, -1.3, -0.2, 0.5, 0.0];

fn basis() -> Result<SplineBasis> {
    SplineBasis::equidistant(3, TEMPLATE.len() - 4, (0.0, 1.0), BasisMode::Standard)
}

/// A simulated data set of one-dimensional curves around a fixed template,
/// optionally with a model fitted to it.
pub struct Session {
    grid: Vec<f64>,
    warp: WarpModel,
    truth: Vec<simm::LatentWarp>,
    data: simm::DataSet,
    fitted: Option<FittedModel>,
}

impl Session {
    pub fn simulate(seed: u64, samples: usize, warp_tau: f64, amp_scale: f64, kappa: f64, noise_sd: f64) -> Result<Self> {
        let warp = WarpModel::new(3, (0.0, 1.0), BoundaryRule::FixedBothEnds, false)?;
        let grid = unit_grid(40);
        let spec = SimulationSpec {
            basis: basis()?,
            warp: warp.clone(),
            warp_cov: (warp_tau > 0.0).then(|| WarpCovariance::bridge(warp_tau)),
            amplitude: if amp_scale > 0.0 {
                Some(AmplitudeModel::diagonal(TemporalKernel::Matern { alpha: 2.0, kappa }, vec![amp_scale])?)
            } else {
                None
            },
            noise: NoiseModel::homogeneous(1),
            noise_sd,
            templates: vec![DMatrix::from_column_slice(TEMPLATE.len(), 1, &TEMPLATE)],
            samples_per_subject: samples.max(2),
            grid: grid.clone(),
            seed,
        };
        let sim = simulate(&spec)?;
        Ok(Self { grid, warp, truth: sim.latents, data: sim.data, fitted: None })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Observed values of sample `n` on the grid.
    pub fn curve(&self, n: usize) -> Vec<f64> {
        self.data.sample(n).values().to_vec()
    }

    pub fn true_warp(&self, n: usize) -> Result<Vec<f64>> {
        let c = self.warp.curve(&self.truth[n])?;
        Ok(self.grid.iter().map(|&t| c.eval(t)).collect())
    }

    /// Fit a model with Matérn amplitude and bridge warps; returns `sigma^2`.
    pub fn fit(&mut self, em: bool, max_outer: usize) -> Result<f64> {
        let sigma = self.data.noise_sd_estimate();
        let abs = VarianceParams {
            warp: WarpCovariance::bridge(0.1),
            amplitude: AmplitudeModel::diagonal(TemporalKernel::Matern { alpha: 2.0, kappa: 0.2 }, vec![0.1])?,
            noise: NoiseModel::homogeneous(1),
        };
        let spec = ModelSpec::new(basis()?, self.warp.clone(), abs.relative_to(sigma))?;
        let options = FitOptions { em, max_outer: max_outer.max(1), ..FitOptions::default() };
        let fitted = fit(&self.data, &spec, &options)?;
        let s2 = fitted.sigma2;
        self.fitted = Some(fitted);
        Ok(s2)
    }

    fn fitted(&self) -> Result<&FittedModel> {
        self.fitted.as_ref().ok_or_else(|| simm::Error::InvalidInput("no model has been fitted yet".into()))
    }

    pub fn fitted_warp(&self, n: usize) -> Result<Vec<f64>> {
        let c = self.warp.curve(&self.fitted()?.latents[n])?;
        Ok(self.grid.iter().map(|&t| c.eval(t)).collect())
    }

    /// Sample `n` registered to template time (NaN where undefined).
    pub fn aligned(&self, n: usize) -> Result<Vec<f64>> {
        align_sample(&self.warp, self.data.sample(n), &self.fitted()?.latents[n], &self.grid)
    }

    pub fn template(&self) -> Result<Vec<f64>> {
        let f = self.fitted()?;
        Ok(self.grid.iter().map(|&t| f.template(0, t)[0]).collect())
    }

    /// Mean cross-sectional variance before and after alignment.
    pub fn variance_reduction(&self) -> Result<(f64, f64)> {
        let raw: Vec<Vec<f64>> = (0..self.len()).map(|n| self.curve(n)).collect();
        let aligned = (0..self.len()).map(|n| self.aligned(n)).collect::<Result<Vec<_>>>()?;
        Ok((mean_cross_sectional_variance(&raw), mean_cross_sectional_variance(&aligned)))
    }

    /// Estimated parameters in data units as `name value` lines.
    pub fn parameters(&self) -> Result<String> {
        let f = self.fitted()?;
        let abs = f.absolute_params();
        let mut out = format!("noise sd      {:.4}\n", f.sigma());
        if let simm::WarpCovFamily::BrownianBridge { tau } = abs.warp.family {
            out.push_str(&format!("warp tau      {tau:.4}\n"));
        }
        if let TemporalKernel::Matern { kappa, .. } = abs.amplitude.kernel {
            out.push_str(&format!("matern range  {kappa:.4}\n"));
        }
        if let simm::AmplitudeVariant::Diagonal { scales } = &abs.amplitude.variant {
            out.push_str(&format!("amplitude sd  {:.4}\n", scales[0]));
        }
        out.push_str(&format!("iterations    {}\n", f.outer_iterations));
        Ok(out)
    }
}
