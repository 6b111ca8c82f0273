//! Model specification and the variance parameters estimated by profile likelihood.

use nalgebra::DMatrix;

use crate::covariance::{AmplitudeModel, NoiseModel, ParamInfo, ParamKind};
use crate::error::{invalid, Result};
use crate::splines::SplineBasis;
use crate::warp::{WarpCovariance, WarpModel};

/// Variance parameters relative to the common residual variance `sigma^2`:
/// the latent warp covariance is `sigma^2 C`, the amplitude covariance is
/// `sigma^2 S` and the noise variance of coordinate `j` is `sigma^2 rho_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceParams {
    pub warp: WarpCovariance,
    pub amplitude: AmplitudeModel,
    pub noise: NoiseModel,
}

impl VarianceParams {
    pub fn validate(&self, warp_model: &WarpModel) -> Result<()> {
        self.warp.validate(warp_model)?;
        self.amplitude.validate()?;
        if self.noise.q() != self.amplitude.q() {
            return Err(invalid("noise and amplitude dimensions differ"));
        }
        Ok(())
    }

    /// Names and kinds of the encoded coordinates, in encoding order.
    pub fn layout(&self, warp_model: &WarpModel) -> Vec<ParamInfo> {
        let mut out = Vec::new();
        self.warp.describe(warp_model, &mut out);
        self.amplitude.describe(&mut out);
        self.noise.describe(&mut out);
        out
    }

    /// Unconstrained encoding (log scales, log-Cholesky matrices).
    pub fn encode(&self, warp_model: &WarpModel) -> Result<Vec<f64>> {
        let mut out = Vec::new();
        self.warp.encode_into(warp_model, &mut out)?;
        self.amplitude.encode_into(&mut out)?;
        self.noise.encode_into(&mut out);
        Ok(out)
    }

    /// Decode a vector produced by [`encode`](Self::encode) for the same structure.
    pub fn decode(&self, warp_model: &WarpModel, v: &[f64]) -> Result<Self> {
        if v.iter().any(|x| !x.is_finite()) {
            return Err(invalid("non-finite encoded parameters"));
        }
        let (warp, a) = self.warp.decode_from(warp_model, v)?;
        let (amplitude, b) = self.amplitude.decode_from(&v[a..])?;
        let (noise, c) = self.noise.decode_from(&v[a + b..])?;
        if a + b + c != v.len() {
            return Err(invalid(format!("encoded vector has {} entries, expected {}", v.len(), a + b + c)));
        }
        Ok(Self { warp, amplitude, noise })
    }

    /// Latent covariance `C` (including the shift variance).
    pub fn warp_matrix(&self, warp_model: &WarpModel) -> DMatrix<f64> {
        self.warp.matrix(warp_model)
    }

    /// Convert absolute variances (data units) to values relative to `sigma^2`.
    pub fn relative_to(&self, sigma: f64) -> Self {
        self.rescaled(1.0 / (sigma * sigma))
    }

    /// Convert relative variances to absolute ones for a given `sigma`.
    pub fn absolute(&self, sigma: f64) -> Self {
        self.rescaled(sigma * sigma)
    }

    fn rescaled(&self, factor: f64) -> Self {
        Self { warp: self.warp.rescaled(factor), amplitude: self.amplitude.rescaled(factor), noise: self.noise.clone() }
    }
}

/// Which kinds of variance parameters are estimated.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FreeParams {
    /// Estimate the Matérn smoothness (otherwise fixed at its initial value).
    pub smoothness: bool,
    /// Estimate heterogeneous noise ratios (otherwise all equal to one).
    pub noise_ratios: bool,
    /// Encoded parameter names (see [`VarianceParams::layout`]) held fixed.
    pub fixed: Vec<String>,
}

/// Mean basis, warp layout and (initial) variance parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub basis: SplineBasis,
    pub warp: WarpModel,
    pub params: VarianceParams,
    pub free: FreeParams,
}

impl ModelSpec {
    pub fn new(basis: SplineBasis, warp: WarpModel, params: VarianceParams) -> Result<Self> {
        let spec = Self { basis, warp, params, free: FreeParams::default() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate(&self.warp)
    }

    pub fn q(&self) -> usize {
        self.params.amplitude.q()
    }

    /// Estimation mask over the encoded parameters. Scale parameters of
    /// Brownian kernels inside the amplitude are confounded with the
    /// amplitude scales and stay fixed.
    pub fn free_mask(&self) -> Vec<bool> {
        self.params
            .layout(&self.warp)
            .iter()
            .map(|p| {
                let by_kind = match p.kind {
                    ParamKind::Smoothness => self.free.smoothness,
                    ParamKind::NoiseRatio => self.free.noise_ratios,
                    ParamKind::KernelScale => false,
                    _ => true,
                };
                by_kind && !self.free.fixed.contains(&p.name)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariance::{CrossCovAnchors, TemporalKernel};
    use crate::splines::{BasisMode, BoundaryRule};

    fn spec() -> ModelSpec {
        let basis = SplineBasis::equidistant(3, 5, (0.0, 1.0), BasisMode::Standard).unwrap();
        let warp = WarpModel::new(3, (0.0, 1.0), BoundaryRule::FixedBothEnds, true).unwrap();
        let anchors = CrossCovAnchors::constant(vec![0.0, 0.5, 1.0], DMatrix::identity(2, 2) * 2.0).unwrap();
        let amplitude = AmplitudeModel::dynamic(
            TemporalKernel::Product(vec![
                TemporalKernel::BrownianBridge { tau: 1.0 },
                TemporalKernel::Matern { alpha: 2.0, kappa: 0.1 },
            ]),
            anchors,
        )
        .unwrap();
        let params = VarianceParams {
            warp: WarpCovariance::bridge(0.3).with_shift(0.1),
            amplitude,
            noise: NoiseModel::new(vec![1.0, 3.0]).unwrap(),
        };
        ModelSpec::new(basis, warp, params).unwrap()
    }

    #[test]
    fn encode_decode_and_layout_agree() {
        let s = spec();
        let v = s.params.encode(&s.warp).unwrap();
        let layout = s.params.layout(&s.warp);
        assert_eq!(v.len(), layout.len());
        // warp tau + shift + (bridge tau, alpha, kappa) + 3 anchors * 3 + rho_2
        assert_eq!(v.len(), 2 + 3 + 9 + 1);
        let back = s.params.decode(&s.warp, &v).unwrap();
        assert!((back.warp_matrix(&s.warp) - s.params.warp_matrix(&s.warp)).abs().max() < 1e-14);
        assert!(s.params.decode(&s.warp, &v[1..]).is_err());
        let mut bad = v.clone();
        bad[0] = f64::NAN;
        assert!(s.params.decode(&s.warp, &bad).is_err());
    }

    #[test]
    fn free_mask_fixes_smoothness_and_redundant_scale() {
        let s = spec();
        let layout = s.params.layout(&s.warp);
        let mask = s.free_mask();
        for (p, free) in layout.iter().zip(&mask) {
            match p.kind {
                ParamKind::Smoothness | ParamKind::KernelScale | ParamKind::NoiseRatio => assert!(!free, "{}", p.name),
                _ => assert!(free, "{}", p.name),
            }
        }
    }

    #[test]
    fn relative_absolute_round_trip() {
        let s = spec();
        let abs = s.params.absolute(0.01);
        let back = abs.relative_to(0.01);
        let c0 = s.params.warp_matrix(&s.warp);
        let c1 = back.warp_matrix(&s.warp);
        assert!((c0 - c1).abs().max() < 1e-12);
        let w = abs.warp_matrix(&s.warp);
        assert!((w[(3, 3)] - 1e-4 * 0.01).abs() < 1e-18);
    }
}
