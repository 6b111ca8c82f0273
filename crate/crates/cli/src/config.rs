//! Run configuration (TOML) and its translation into a model specification.
//!
//! Every section and key is optional; see `docs/config.md` for the grammar
//! and defaults. Times and knots refer to the rescaled unit interval.
//! Variance-type starting values are absolute (data units).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use simm::covariance::{AmplitudeModel, CrossCovAnchors, NoiseModel, TemporalKernel};
use simm::inference::fit_fixed_effects_gls;
use simm::model::FreeParams;
use simm::tasks::eval_template;
use simm::{BasisMode, BoundaryRule, DataSet, FitOptions, LatentWarp, ModelSpec, SplineBasis, VarianceParams, WarpCovariance, WarpModel};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub basis: BasisConfig,
    pub warp: WarpConfig,
    pub amplitude: AmplitudeConfig,
    pub noise: NoiseConfig,
    pub fit: FitConfig,
    pub simulate: SimulateConfig,
    pub classify: ClassifyConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisModeName {
    Standard,
    Increasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisConfig {
    pub mode: BasisModeName,
    pub degree: usize,
    /// Number of equidistant interior knots, used when `knots` is absent.
    pub interior_knots: usize,
    pub knots: Option<Vec<f64>>,
    pub domain: [f64; 2],
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self { mode: BasisModeName::Standard, degree: 3, interior_knots: 5, knots: None, domain: [0.0, 1.0] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarpFamilyName {
    Bridge,
    Motion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryName {
    Fixed,
    Extrapolate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WarpConfig {
    /// Number of interior anchor points.
    pub anchors: usize,
    pub family: WarpFamilyName,
    pub tau: f64,
    pub boundary: BoundaryName,
    pub shift: bool,
    pub shift_sd: f64,
}

impl Default for WarpConfig {
    fn default() -> Self {
        Self { anchors: 3, family: WarpFamilyName::Bridge, tau: 0.1, boundary: BoundaryName::Fixed, shift: false, shift_sd: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    Diagonal,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelName {
    Matern,
    Bridge,
    Motion,
    Mixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmplitudeConfig {
    pub variant: VariantName,
    pub kernel: KernelName,
    pub alpha: f64,
    pub kappa: f64,
    pub a: f64,
    pub estimate_smoothness: bool,
    /// Per-coordinate standard deviations; derived from the data when absent.
    pub scales: Option<Vec<f64>>,
    /// Anchor times of the dynamic variant (must start at 0 and end at 1).
    pub anchor_times: Vec<f64>,
}

impl Default for AmplitudeConfig {
    fn default() -> Self {
        Self {
            variant: VariantName::Diagonal,
            kernel: KernelName::Matern,
            alpha: 2.0,
            kappa: 0.2,
            a: 1.0,
            estimate_smoothness: false,
            scales: None,
            anchor_times: vec![0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Relative noise variances, the first equal to 1; all ones when absent.
    pub ratios: Option<Vec<f64>>,
    pub estimate_ratios: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub max_outer: usize,
    pub rel_tol: f64,
    pub em: bool,
    pub max_warp_iter: usize,
    /// Encoded parameter names held at their starting values.
    pub fixed: Vec<String>,
    pub seed: u64,
    /// Worker threads; 0 uses all available cores.
    pub threads: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        let d = FitOptions::default();
        Self { max_outer: d.max_outer, rel_tol: d.rel_tol, em: d.em, max_warp_iter: d.max_warp_iter, fixed: Vec::new(), seed: 0, threads: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub subjects: usize,
    pub samples_per_subject: usize,
    pub q: usize,
    pub grid_points: usize,
    /// Original time units of the emitted table.
    pub time_range: [f64; 2],
    pub noise_sd: f64,
    pub warps: bool,
    pub amplitude: bool,
    /// Standard deviation of the random-walk template coefficients.
    pub template_scale: f64,
    /// Explicit template coefficients per subject, basis-major (`K * q` values).
    pub templates: Option<Vec<Vec<f64>>>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            subjects: 3,
            samples_per_subject: 10,
            q: 2,
            grid_points: 50,
            time_range: [0.0, 1.0],
            noise_sd: 0.01,
            warps: true,
            amplitude: true,
            template_scale: 1.0,
            templates: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Simm,
    Nc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub method: MethodName,
    /// Coordinate weights of the nearest-centroid rule; unit weights when absent.
    pub weights: Option<Vec<f64>>,
    pub folds: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self { method: MethodName::Simm, weights: None, folds: 5 }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::data(format!("config: {e}")))
    }

    pub fn load(path: &std::path::Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            max_outer: self.fit.max_outer,
            rel_tol: self.fit.rel_tol,
            em: self.fit.em,
            max_warp_iter: self.fit.max_warp_iter,
            ..FitOptions::default()
        }
    }

    pub fn basis(&self) -> CliResult<SplineBasis> {
        let b = &self.basis;
        let mode = match b.mode {
            BasisModeName::Standard => BasisMode::Standard,
            BasisModeName::Increasing => BasisMode::Increasing,
        };
        let domain = (b.domain[0], b.domain[1]);
        Ok(match &b.knots {
            Some(k) => SplineBasis::new(b.degree, k.clone(), domain, mode)?,
            None => SplineBasis::equidistant(b.degree, b.interior_knots, domain, mode)?,
        })
    }

    pub fn warp_model(&self) -> CliResult<WarpModel> {
        let boundary = match self.warp.boundary {
            BoundaryName::Fixed => BoundaryRule::FixedBothEnds,
            BoundaryName::Extrapolate => BoundaryRule::ExtrapolateRight,
        };
        Ok(WarpModel::new(self.warp.anchors, (0.0, 1.0), boundary, self.warp.shift)?)
    }

    pub fn kernel(&self) -> TemporalKernel {
        let a = &self.amplitude;
        match a.kernel {
            KernelName::Matern => TemporalKernel::Matern { alpha: a.alpha, kappa: a.kappa },
            // the scale of a Brownian amplitude kernel is absorbed by the amplitude scales
            KernelName::Bridge => TemporalKernel::BrownianBridge { tau: 1.0 },
            KernelName::Motion => TemporalKernel::BrownianMotion { tau: 1.0 },
            KernelName::Mixture => TemporalKernel::Mixture { a: a.a },
        }
    }

    pub fn warp_covariance(&self) -> WarpCovariance {
        let cov = match self.warp.family {
            WarpFamilyName::Bridge => WarpCovariance::bridge(self.warp.tau),
            WarpFamilyName::Motion => WarpCovariance::motion(self.warp.tau),
        };
        if self.warp.shift {
            cov.with_shift(self.warp.shift_sd)
        } else {
            cov
        }
    }

    pub fn noise_model(&self, q: usize) -> CliResult<NoiseModel> {
        match &self.noise.ratios {
            Some(r) if r.len() != q => Err(CliError::data(format!("noise.ratios has {} entries, data have q = {q}", r.len()))),
            Some(r) => Ok(NoiseModel::new(r.clone())?),
            None => Ok(NoiseModel::homogeneous(q)),
        }
    }

    /// Amplitude model with the given absolute per-coordinate scales (the
    /// dynamic variant starts from `diag(scales^2)` at every anchor).
    pub fn amplitude_model(&self, scales: &[f64]) -> CliResult<AmplitudeModel> {
        let kernel = self.kernel();
        Ok(match self.amplitude.variant {
            VariantName::Diagonal => AmplitudeModel::diagonal(kernel, scales.to_vec())?,
            VariantName::Dynamic => {
                let a = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(scales.len(), scales.iter().map(|s| s * s)));
                AmplitudeModel::dynamic(kernel, CrossCovAnchors::constant(self.amplitude.anchor_times.clone(), a)?)?
            }
        })
    }

    /// Model structure with absolute starting values given scales; used both
    /// for fitting and for rebuilding a saved model.
    pub fn spec_with_scales(&self, scales: &[f64], sigma: f64) -> CliResult<ModelSpec> {
        let q = scales.len();
        let abs = VarianceParams { warp: self.warp_covariance(), amplitude: self.amplitude_model(scales)?, noise: self.noise_model(q)? };
        let mut spec = ModelSpec::new(self.basis()?, self.warp_model()?, abs.relative_to(sigma))?;
        spec.free = FreeParams {
            smoothness: self.amplitude.estimate_smoothness,
            noise_ratios: self.noise.estimate_ratios,
            fixed: self.fit.fixed.clone(),
        };
        let names: Vec<String> = spec.params.layout(&spec.warp).into_iter().map(|p| p.name).collect();
        if let Some(bad) = spec.free.fixed.iter().find(|f| !names.contains(f)) {
            return Err(CliError::data(format!("fit.fixed: unknown parameter {bad}; known: {}", names.join(", "))));
        }
        Ok(spec)
    }

    /// Starting model for `data`: configured values where given, otherwise
    /// amplitude scales split from the residual variance of a template fit
    /// at identity warps. Returns the spec and the starting noise level.
    pub fn initial_spec(&self, data: &DataSet) -> CliResult<(ModelSpec, f64)> {
        let q = data.q();
        let sigma = data.noise_sd_estimate();
        if let Some(s) = &self.amplitude.scales {
            if s.len() != q {
                return Err(CliError::data(format!("amplitude.scales has {} entries, data have q = {q}", s.len())));
            }
            return Ok((self.spec_with_scales(s, sigma)?, sigma));
        }
        let provisional = self.spec_with_scales(&vec![sigma; q], sigma)?;
        let identity = vec![LatentWarp::identity(&provisional.warp); data.len()];
        let fe = fit_fixed_effects_gls(&provisional, &provisional.params, data, &identity)?;
        let mut sum = vec![0.0; q];
        let mut count = vec![0usize; q];
        for s in data.samples() {
            for (k, &t) in s.times().iter().enumerate() {
                let theta = eval_template(&provisional.basis, &fe.coefficients[s.subject], t);
                for j in 0..q {
                    if let Some(y) = s.value(k, j) {
                        sum[j] += (y - theta[j]).powi(2);
                        count[j] += 1;
                    }
                }
            }
        }
        let noise_var = sigma * sigma;
        let scales: Vec<f64> = (0..q)
            .map(|j| {
                let r = if count[j] > 0 { sum[j] / count[j] as f64 } else { noise_var };
                (r - noise_var).max(0.5 * r).max(noise_var).sqrt()
            })
            .collect();
        Ok((self.spec_with_scales(&scales, sigma)?, sigma))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.fit.max_outer, 5);
        assert_eq!(c.warp.tau, 0.1);
        assert_eq!(c.amplitude.kappa, 0.2);
    }

    #[test]
    fn sections_parse() {
        let c = RunConfig::parse(
            "[basis]\nknots = [0.4, 0.6]\nmode = \"increasing\"\n[amplitude]\nvariant = \"dynamic\"\nanchor_times = [0, 0.4, 0.6, 1]\n[fit]\nem = true\n",
        )
        .unwrap();
        assert_eq!(c.basis.mode, BasisModeName::Increasing);
        assert_eq!(c.amplitude.anchor_times.len(), 4);
        assert!(c.fit.em);
        let spec = c.spec_with_scales(&[0.1, 0.2], 0.01).unwrap();
        assert_eq!(spec.q(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("[fit]\nmax_iter = 3\n").is_err());
        assert!(RunConfig::parse("[warp]\nfamily = \"spline\"\n").is_err());
    }

    #[test]
    fn unknown_fixed_parameter_is_rejected() {
        let c = RunConfig::parse("[fit]\nfixed = [\"warp.log_sigma\"]\n").unwrap();
        assert!(matches!(c.spec_with_scales(&[1.0], 1.0), Err(CliError::Data(_))));
        let c = RunConfig::parse("[fit]\nfixed = [\"warp.log_tau\"]\n").unwrap();
        assert!(c.spec_with_scales(&[1.0], 1.0).is_ok());
    }
}
