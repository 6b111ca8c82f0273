//! Temporal covariance kernels and multivariate amplitude covariances.
//!
//! The amplitude covariance `S(s, t)` is either a shared temporal kernel
//! times per-coordinate variances, or a dynamic cross-covariance
//! `K(s, t) = f(s, t) B_s^T B_t` where `B_t` is the positive square root of a
//! linear interpolation between anchor matrices. The latter is positive
//! definite for any positive definite `f` and anchors.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::linalg::{log_cholesky_decode, log_cholesky_encode, log_cholesky_len, sym_sqrt};

/// What an encoded parameter controls; used to decide which are estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Scale of the latent warp covariance (or unstructured entries).
    WarpScale,
    /// Standard deviation of the random shift.
    ShiftScale,
    /// Scale parameter of a Brownian kernel used as an amplitude factor.
    KernelScale,
    /// Matérn smoothness.
    Smoothness,
    /// Matérn range.
    Range,
    /// Stationary weight of the mixture kernel.
    Mixture,
    /// Per-coordinate amplitude scale (diagonal variant).
    AmplitudeScale,
    /// Log-Cholesky entry of an anchor matrix (dynamic variant).
    AnchorMatrix,
    /// Relative noise variance of coordinates 2..q.
    NoiseRatio,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamInfo {
    pub name: String,
    pub kind: ParamKind,
}

fn info(name: impl Into<String>, kind: ParamKind) -> ParamInfo {
    ParamInfo { name: name.into(), kind }
}

/// A scalar covariance function on the unit interval.
#[derive(Debug, Clone, PartialEq)]
pub enum TemporalKernel {
    /// `tau^2 (min(s,t) - s t)`.
    BrownianBridge { tau: f64 },
    /// `tau^2 min(s,t)`.
    BrownianMotion { tau: f64 },
    /// `2^{1-alpha}/Gamma(alpha) d^alpha K_alpha(d)`, `d = |s-t|/kappa`.
    Matern { alpha: f64, kappa: f64 },
    /// `a + min(s,t) - s t`: stationary level plus a unit bridge.
    Mixture { a: f64 },
    /// Pointwise product; positive definite by the Schur product theorem.
    Product(Vec<TemporalKernel>),
}

const MATERN_CUTOFF: f64 = 700.0;

fn matern(alpha: f64, kappa: f64, lag: f64) -> f64 {
    let d = lag.abs() / kappa;
    if d == 0.0 {
        return 1.0;
    }
    if d > MATERN_CUTOFF {
        return 0.0;
    }
    // ln_gamma is only accurate to ~1e-11; gamma itself is exact to rounding until it overflows
    let ln_g = if alpha < 170.0 { puruspe::gamma(alpha).ln() } else { puruspe::ln_gamma(alpha) };
    let log_coef = (1.0 - alpha) * std::f64::consts::LN_2 - ln_g;
    let (_, k) = puruspe::Inu_Knu(alpha, d);
    (log_coef + alpha * d.ln()).exp() * k
}

impl TemporalKernel {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(format!("kernel parameter {name} must be positive and finite (got {v})")))
            }
        };
        match self {
            Self::BrownianBridge { tau } | Self::BrownianMotion { tau } => positive("tau", *tau),
            Self::Matern { alpha, kappa } => {
                positive("alpha", *alpha)?;
                positive("kappa", *kappa)
            }
            Self::Mixture { a } => positive("a", *a),
            Self::Product(parts) => {
                if parts.is_empty() {
                    return Err(invalid("empty kernel product"));
                }
                parts.iter().try_for_each(Self::validate)
            }
        }
    }

    /// Kernel value; parameters are assumed valid.
    pub fn eval(&self, s: f64, t: f64) -> f64 {
        match self {
            Self::BrownianBridge { tau } => tau * tau * (s.min(t) - s * t),
            Self::BrownianMotion { tau } => tau * tau * s.min(t),
            Self::Matern { alpha, kappa } => matern(*alpha, *kappa, s - t),
            Self::Mixture { a } => a + s.min(t) - s * t,
            Self::Product(parts) => parts.iter().map(|k| k.eval(s, t)).product(),
        }
    }

    /// Gram matrix `{f(t_j, t_k)}` (exactly symmetric).
    pub fn gram(&self, times: &[f64]) -> DMatrix<f64> {
        let m = times.len();
        let mut g = DMatrix::zeros(m, m);
        for j in 0..m {
            for k in 0..=j {
                let v = self.eval(times[j], times[k]);
                g[(j, k)] = v;
                g[(k, j)] = v;
            }
        }
        g
    }

    pub(crate) fn describe(&self, prefix: &str, out: &mut Vec<ParamInfo>) {
        match self {
            Self::BrownianBridge { .. } | Self::BrownianMotion { .. } => {
                out.push(info(format!("{prefix}.log_tau"), ParamKind::KernelScale))
            }
            Self::Matern { .. } => {
                out.push(info(format!("{prefix}.log_alpha"), ParamKind::Smoothness));
                out.push(info(format!("{prefix}.log_kappa"), ParamKind::Range));
            }
            Self::Mixture { .. } => out.push(info(format!("{prefix}.log_a"), ParamKind::Mixture)),
            Self::Product(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    p.describe(&format!("{prefix}.{i}"), out);
                }
            }
        }
    }

    pub(crate) fn encode_into(&self, out: &mut Vec<f64>) {
        match self {
            Self::BrownianBridge { tau } | Self::BrownianMotion { tau } => out.push(tau.ln()),
            Self::Matern { alpha, kappa } => {
                out.push(alpha.ln());
                out.push(kappa.ln());
            }
            Self::Mixture { a } => out.push(a.ln()),
            Self::Product(parts) => parts.iter().for_each(|p| p.encode_into(out)),
        }
    }

    /// Decode from the front of `v`, returning the number of values consumed.
    pub(crate) fn decode_from(&self, v: &[f64]) -> Result<(Self, usize)> {
        let need = |n: usize| {
            if v.len() < n {
                Err(invalid("encoded kernel vector too short"))
            } else {
                Ok(())
            }
        };
        Ok(match self {
            Self::BrownianBridge { .. } => {
                need(1)?;
                (Self::BrownianBridge { tau: v[0].exp() }, 1)
            }
            Self::BrownianMotion { .. } => {
                need(1)?;
                (Self::BrownianMotion { tau: v[0].exp() }, 1)
            }
            Self::Matern { .. } => {
                need(2)?;
                (Self::Matern { alpha: v[0].exp(), kappa: v[1].exp() }, 2)
            }
            Self::Mixture { .. } => {
                need(1)?;
                (Self::Mixture { a: v[0].exp() }, 1)
            }
            Self::Product(parts) => {
                let mut used = 0;
                let mut decoded = Vec::with_capacity(parts.len());
                for p in parts {
                    let (k, n) = p.decode_from(&v[used..])?;
                    decoded.push(k);
                    used += n;
                }
                (Self::Product(decoded), used)
            }
        })
    }
}

/// Checked kernel evaluation.
pub fn kernel_eval(kernel: &TemporalKernel, s: f64, t: f64) -> Result<f64> {
    kernel.validate()?;
    if !(s.is_finite() && t.is_finite()) {
        return Err(invalid("kernel arguments must be finite"));
    }
    Ok(kernel.eval(s, t))
}

/// Anchor times `0 = t_1 < ... < t_l = 1` with symmetric positive definite
/// `q x q` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCovAnchors {
    times: Vec<f64>,
    matrices: Vec<DMatrix<f64>>,
}

impl CrossCovAnchors {
    pub fn new(times: Vec<f64>, matrices: Vec<DMatrix<f64>>) -> Result<Self> {
        if times.len() < 2 || times.len() != matrices.len() {
            return Err(invalid("need at least two anchor times, one matrix per anchor"));
        }
        if times[0] != 0.0 || *times.last().unwrap() != 1.0 {
            return Err(invalid("anchor times must start at 0 and end at 1"));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("anchor times must be strictly increasing"));
        }
        let q = matrices[0].nrows();
        for (k, a) in matrices.iter().enumerate() {
            if a.nrows() != q || a.ncols() != q {
                return Err(invalid(format!("anchor matrix {k} is not {q}x{q}")));
            }
            if (a - a.transpose()).abs().max() > 1e-12 * a.abs().max().max(1.0) {
                return Err(invalid(format!("anchor matrix {k} is not symmetric")));
            }
            if a.clone().cholesky().is_none() {
                return Err(invalid(format!("anchor matrix {k} is not positive definite")));
            }
        }
        Ok(Self { times, matrices })
    }

    /// Equidistant or explicit anchor times with every matrix equal to `a`.
    pub fn constant(times: Vec<f64>, a: DMatrix<f64>) -> Result<Self> {
        let n = times.len();
        Self::new(times, vec![a; n])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.matrices
    }

    pub fn q(&self) -> usize {
        self.matrices[0].nrows()
    }

    /// Linear interpolation `B_t^T B_t` between neighbouring anchors (`t` clamped to [0,1]).
    pub fn interp(&self, t: f64) -> DMatrix<f64> {
        let t = t.clamp(0.0, 1.0);
        let k = crate::splines::interval(&self.times, t);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let w1 = (t - t0) / (t1 - t0);
        let w0 = (t1 - t) / (t1 - t0);
        &self.matrices[k] * w0 + &self.matrices[k + 1] * w1
    }

    /// The symmetric positive definite `B_t` with `B_t^T B_t = interp(t)`.
    pub fn interp_sqrt(&self, t: f64) -> Result<DMatrix<f64>> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain { value: t, lo: 0.0, hi: 1.0 });
        }
        Ok(sym_sqrt(&self.interp(t)))
    }
}

/// Free-function form of [`CrossCovAnchors::interp_sqrt`].
pub fn interp_sqrt(anchors: &CrossCovAnchors, t: f64) -> Result<DMatrix<f64>> {
    anchors.interp_sqrt(t)
}

#[derive(Debug, Clone, PartialEq)]
pub enum AmplitudeVariant {
    /// Independent coordinates with standard deviations `scales`.
    Diagonal { scales: Vec<f64> },
    /// Dynamic cross-covariance from interpolated anchor matrices.
    Dynamic(CrossCovAnchors),
}

/// Amplitude covariance `S(s,t)` (relative to the common variance `sigma^2`).
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeModel {
    pub kernel: TemporalKernel,
    pub variant: AmplitudeVariant,
}

impl AmplitudeModel {
    pub fn diagonal(kernel: TemporalKernel, scales: Vec<f64>) -> Result<Self> {
        let m = Self { kernel, variant: AmplitudeVariant::Diagonal { scales } };
        m.validate()?;
        Ok(m)
    }

    pub fn dynamic(kernel: TemporalKernel, anchors: CrossCovAnchors) -> Result<Self> {
        let m = Self { kernel, variant: AmplitudeVariant::Dynamic(anchors) };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if let AmplitudeVariant::Diagonal { scales } = &self.variant {
            if scales.is_empty() || scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(invalid("amplitude scales must be positive"));
            }
        }
        Ok(())
    }

    pub fn q(&self) -> usize {
        match &self.variant {
            AmplitudeVariant::Diagonal { scales } => scales.len(),
            AmplitudeVariant::Dynamic(a) => a.q(),
        }
    }

    /// `S(s,t)` as a `q x q` matrix.
    pub fn cross_cov(&self, s: f64, t: f64) -> DMatrix<f64> {
        let f = self.kernel.eval(s, t);
        match &self.variant {
            AmplitudeVariant::Diagonal { scales } => {
                DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(scales.len(), scales.iter().map(|s| f * s * s)))
            }
            AmplitudeVariant::Dynamic(anchors) => {
                let bs = sym_sqrt(&anchors.interp(s));
                let bt = sym_sqrt(&anchors.interp(t));
                bs.transpose() * bt * f
            }
        }
    }

    /// Time-major block matrix: block `(j, k)` is `S(t_j, t_k)`.
    pub fn block_cov(&self, times: &[f64]) -> DMatrix<f64> {
        let gram = self.kernel.gram(times);
        self.block_cov_from_gram(times, &gram)
    }

    /// Block covariance given a precomputed temporal Gram matrix.
    pub fn block_cov_from_gram(&self, times: &[f64], gram: &DMatrix<f64>) -> DMatrix<f64> {
        let m = times.len();
        let q = self.q();
        let mut out = DMatrix::zeros(q * m, q * m);
        match &self.variant {
            AmplitudeVariant::Diagonal { scales } => {
                for j in 0..m {
                    for k in 0..m {
                        let f = gram[(j, k)];
                        for (a, s) in scales.iter().enumerate() {
                            out[(j * q + a, k * q + a)] = f * s * s;
                        }
                    }
                }
            }
            AmplitudeVariant::Dynamic(anchors) => {
                let roots: Vec<DMatrix<f64>> = times.iter().map(|&t| sym_sqrt(&anchors.interp(t))).collect();
                for j in 0..m {
                    for k in 0..=j {
                        let block = roots[j].transpose() * &roots[k] * gram[(j, k)];
                        for a in 0..q {
                            for b in 0..q {
                                out[(j * q + a, k * q + b)] = block[(a, b)];
                                out[(k * q + b, j * q + a)] = block[(a, b)];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub(crate) fn describe(&self, out: &mut Vec<ParamInfo>) {
        self.kernel.describe("amplitude.kernel", out);
        match &self.variant {
            AmplitudeVariant::Diagonal { scales } => {
                for j in 0..scales.len() {
                    out.push(info(format!("amplitude.log_scale.{}", j + 1), ParamKind::AmplitudeScale));
                }
            }
            AmplitudeVariant::Dynamic(anchors) => {
                let q = anchors.q();
                for k in 0..anchors.times().len() {
                    for i in 0..q {
                        for j in 0..=i {
                            out.push(info(format!("amplitude.anchor{}.L{}{}", k + 1, i + 1, j + 1), ParamKind::AnchorMatrix));
                        }
                    }
                }
            }
        }
    }

    pub(crate) fn encode_into(&self, out: &mut Vec<f64>) -> Result<()> {
        self.kernel.encode_into(out);
        match &self.variant {
            AmplitudeVariant::Diagonal { scales } => out.extend(scales.iter().map(|s| s.ln())),
            AmplitudeVariant::Dynamic(anchors) => {
                for a in anchors.matrices() {
                    out.extend(log_cholesky_encode(a)?);
                }
            }
        }
        Ok(())
    }

    pub(crate) fn decode_from(&self, v: &[f64]) -> Result<(Self, usize)> {
        let (kernel, mut used) = self.kernel.decode_from(v)?;
        let variant = match &self.variant {
            AmplitudeVariant::Diagonal { scales } => {
                let n = scales.len();
                if v.len() < used + n {
                    return Err(invalid("encoded amplitude vector too short"));
                }
                let s = v[used..used + n].iter().map(|x| x.exp()).collect();
                used += n;
                AmplitudeVariant::Diagonal { scales: s }
            }
            AmplitudeVariant::Dynamic(anchors) => {
                let q = anchors.q();
                let len = log_cholesky_len(q);
                let mut mats = Vec::with_capacity(anchors.times().len());
                for _ in anchors.times() {
                    if v.len() < used + len {
                        return Err(invalid("encoded amplitude vector too short"));
                    }
                    mats.push(log_cholesky_decode(&v[used..used + len], q)?);
                    used += len;
                }
                AmplitudeVariant::Dynamic(CrossCovAnchors::new(anchors.times().to_vec(), mats)?)
            }
        };
        Ok((Self { kernel, variant }, used))
    }

    /// Multiply all variances by `factor` (scales by its square root).
    pub fn rescaled(&self, factor: f64) -> Self {
        let variant = match &self.variant {
            AmplitudeVariant::Diagonal { scales } => {
                AmplitudeVariant::Diagonal { scales: scales.iter().map(|s| s * factor.sqrt()).collect() }
            }
            AmplitudeVariant::Dynamic(anchors) => AmplitudeVariant::Dynamic(CrossCovAnchors {
                times: anchors.times.clone(),
                matrices: anchors.matrices.iter().map(|a| a * factor).collect(),
            }),
        };
        Self { kernel: self.kernel.clone(), variant }
    }
}

/// Free-function form of [`AmplitudeModel::cross_cov`].
pub fn cross_cov_eval(model: &AmplitudeModel, s: f64, t: f64) -> DMatrix<f64> {
    model.cross_cov(s, t)
}

/// Free-function form of [`AmplitudeModel::block_cov`].
pub fn assemble_block_cov(model: &AmplitudeModel, times: &[f64]) -> DMatrix<f64> {
    model.block_cov(times)
}

/// Relative measurement-noise variances; the first coordinate is the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    rho: Vec<f64>,
}

impl NoiseModel {
    pub fn homogeneous(q: usize) -> Self {
        Self { rho: vec![1.0; q] }
    }

    /// `rho[0]` must equal 1.
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        if rho.is_empty() || rho[0] != 1.0 {
            return Err(invalid("noise ratios need rho_1 = 1"));
        }
        if rho.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(invalid("noise ratios must be positive"));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn q(&self) -> usize {
        self.rho.len()
    }

    pub(crate) fn describe(&self, out: &mut Vec<ParamInfo>) {
        for j in 1..self.rho.len() {
            out.push(info(format!("noise.log_rho.{}", j + 1), ParamKind::NoiseRatio));
        }
    }

    pub(crate) fn encode_into(&self, out: &mut Vec<f64>) {
        out.extend(self.rho[1..].iter().map(|r| r.ln()));
    }

    pub(crate) fn decode_from(&self, v: &[f64]) -> Result<(Self, usize)> {
        let n = self.rho.len() - 1;
        if v.len() < n {
            return Err(invalid("encoded noise vector too short"));
        }
        let mut rho = vec![1.0];
        rho.extend(v[..n].iter().map(|x| x.exp()));
        Ok((Self::new(rho)?, n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_eigenvalue, min_eigenvalue};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_spd(rng: &mut ChaCha8Rng, q: usize) -> DMatrix<f64> {
        let a = DMatrix::from_fn(q, q, |_, _| rng.random::<f64>() - 0.5);
        &a * a.transpose() + DMatrix::identity(q, q) * 0.05
    }

    #[test]
    fn closed_form_values() {
        let bridge = TemporalKernel::BrownianBridge { tau: 1.0 };
        assert!((bridge.eval(0.25, 0.75) - 0.0625).abs() < 1e-15);
        let m12 = TemporalKernel::Matern { alpha: 0.5, kappa: 0.2 };
        assert!((m12.eval(0.3, 0.5) - (-1.0f64).exp()).abs() < 1e-12);
        let m32 = TemporalKernel::Matern { alpha: 1.5, kappa: 0.1 };
        assert!((m32.eval(0.4, 0.5) - 2.0 * (-1.0f64).exp()).abs() < 1e-12);
        let mix = TemporalKernel::Mixture { a: 20.0 };
        assert!((mix.eval(0.5, 0.5) - 20.25).abs() < 1e-15);
        let motion = TemporalKernel::BrownianMotion { tau: 2.0 };
        assert_eq!(motion.eval(0.3, 0.9), 4.0 * 0.3);
    }

    #[test]
    fn matern_zero_lag_and_continuity() {
        for alpha in [1.0, 1.5, 2.0, 3.7] {
            let k = TemporalKernel::Matern { alpha, kappa: 0.1 };
            assert_eq!(k.eval(0.4, 0.4), 1.0);
            assert!((k.eval(0.4, 0.4 + 1e-6) - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn product_is_pointwise() {
        let a = TemporalKernel::Mixture { a: 3.0 };
        let b = TemporalKernel::Matern { alpha: 2.0, kappa: 0.3 };
        let p = TemporalKernel::Product(vec![a.clone(), b.clone()]);
        for (s, t) in [(0.1, 0.2), (0.5, 0.9), (0.7, 0.7)] {
            assert!((p.eval(s, t) - a.eval(s, t) * b.eval(s, t)).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(kernel_eval(&TemporalKernel::Matern { alpha: 0.0, kappa: 1.0 }, 0.0, 0.1).is_err());
        assert!(kernel_eval(&TemporalKernel::BrownianBridge { tau: -1.0 }, 0.0, 0.1).is_err());
        assert!(kernel_eval(&TemporalKernel::Product(vec![]), 0.0, 0.1).is_err());
        assert!(kernel_eval(&TemporalKernel::Mixture { a: 1.0 }, 0.2, 0.3).is_ok());
    }

    #[test]
    fn kernels_are_symmetric_and_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let kernels = [
            TemporalKernel::BrownianBridge { tau: 0.7 },
            TemporalKernel::BrownianMotion { tau: 1.3 },
            TemporalKernel::Matern { alpha: 0.5, kappa: 0.2 },
            TemporalKernel::Matern { alpha: 2.0, kappa: 0.1 },
            TemporalKernel::Mixture { a: 20.0 },
            TemporalKernel::Product(vec![
                TemporalKernel::Mixture { a: 2.0 },
                TemporalKernel::Matern { alpha: 1.7, kappa: 0.15 },
            ]),
        ];
        for k in &kernels {
            let times: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
            let g = k.gram(&times);
            assert_eq!(g, g.transpose());
            let (lo, hi) = (min_eigenvalue(&g), max_eigenvalue(&g));
            assert!(lo >= -1e-8 * hi, "{k:?}: {lo} vs {hi}");
        }
    }

    #[test]
    fn interp_sqrt_identity_and_anchor_values() {
        let id = CrossCovAnchors::constant(vec![0.0, 0.5, 1.0], DMatrix::identity(2, 2)).unwrap();
        for t in [0.0, 0.3, 0.5, 1.0] {
            assert!((id.interp_sqrt(t).unwrap() - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-14);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mats: Vec<_> = (0..4).map(|_| random_spd(&mut rng, 3)).collect();
        let a = CrossCovAnchors::new(vec![0.0, 0.4, 0.6, 1.0], mats.clone()).unwrap();
        for (k, t) in a.times().to_vec().into_iter().enumerate() {
            let b = a.interp_sqrt(t).unwrap();
            assert!((b.transpose() * &b - &mats[k]).abs().max() < 1e-12);
        }
        assert!(a.interp_sqrt(1.5).is_err());
    }

    #[test]
    fn interp_sqrt_continuity() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mats: Vec<_> = (0..3).map(|_| random_spd(&mut rng, 2)).collect();
        let a = CrossCovAnchors::new(vec![0.0, 0.5, 1.0], mats).unwrap();
        for t in [0.1, 0.3, 0.6, 0.85] {
            let b = a.interp_sqrt(t).unwrap();
            let slope = (a.interp_sqrt(t + 1e-3).unwrap() - &b).norm() / 1e-3;
            let step = (a.interp_sqrt(t + 1e-4).unwrap() - &b).norm();
            assert!(step <= 2.0 * slope * 1e-4 + 1e-12);
        }
    }

    #[test]
    fn non_pd_anchor_rejected() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(CrossCovAnchors::new(vec![0.0, 1.0], vec![DMatrix::identity(2, 2), bad]).is_err());
        assert!(CrossCovAnchors::new(vec![0.1, 1.0], vec![DMatrix::identity(2, 2); 2]).is_err());
    }

    #[test]
    fn diagonal_and_identity_dynamic_cross_cov() {
        let k = TemporalKernel::Mixture { a: 0.5 };
        let diag = AmplitudeModel::diagonal(k.clone(), vec![1.0, 2.0]).unwrap();
        // f(0,0) = 0.5
        let s = cross_cov_eval(&diag, 0.0, 0.0);
        assert_eq!(s, DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, 2.0])));
        let anchors = CrossCovAnchors::constant(vec![0.0, 1.0], DMatrix::identity(3, 3)).unwrap();
        let dynm = AmplitudeModel::dynamic(k.clone(), anchors).unwrap();
        let s = dynm.cross_cov(0.2, 0.7);
        assert!((s - DMatrix::<f64>::identity(3, 3) * k.eval(0.2, 0.7)).abs().max() < 1e-14);
    }

    #[test]
    fn cross_cov_transpose_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mats: Vec<_> = (0..2).map(|_| random_spd(&mut rng, 2)).collect();
        let m = AmplitudeModel::dynamic(
            TemporalKernel::Matern { alpha: 2.0, kappa: 0.2 },
            CrossCovAnchors::new(vec![0.0, 1.0], mats).unwrap(),
        )
        .unwrap();
        let a = m.cross_cov(0.2, 0.9);
        let b = m.cross_cov(0.9, 0.2);
        assert!((a.transpose() - b).abs().max() < 1e-14);
    }

    #[test]
    fn block_cov_scalar_reduction_and_layout() {
        let k = TemporalKernel::Matern { alpha: 1.5, kappa: 0.3 };
        let times = [0.1, 0.4, 0.45, 0.9];
        let m = AmplitudeModel::diagonal(k.clone(), vec![1.0]).unwrap();
        assert!((m.block_cov(&times) - k.gram(&times)).abs().max() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let mats: Vec<_> = (0..3).map(|_| random_spd(&mut rng, 2)).collect();
        let d = AmplitudeModel::dynamic(k, CrossCovAnchors::new(vec![0.0, 0.5, 1.0], mats).unwrap()).unwrap();
        let big = d.block_cov(&times);
        assert_eq!(big, big.transpose());
        for j in 0..4 {
            for kk in 0..4 {
                let block = d.cross_cov(times[j], times[kk]);
                let sub = big.view((2 * j, 2 * kk), (2, 2));
                assert!((sub - block).abs().max() < 1e-14);
            }
        }
    }

    #[test]
    fn block_cov_psd_random_configurations() {
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        for _ in 0..100 {
            let q = rng.random_range(1..4);
            let l = rng.random_range(2..5);
            let mut times: Vec<f64> = (1..l - 1).map(|_| rng.random::<f64>()).collect();
            times.push(0.0);
            times.push(1.0);
            times.sort_by(f64::total_cmp);
            times.dedup();
            let mats: Vec<_> = times.iter().map(|_| random_spd(&mut rng, q)).collect();
            let kernel = TemporalKernel::Product(vec![
                TemporalKernel::Mixture { a: 0.1 + 5.0 * rng.random::<f64>() },
                TemporalKernel::Matern { alpha: 0.5 + 2.0 * rng.random::<f64>(), kappa: 0.05 + 0.3 * rng.random::<f64>() },
            ]);
            let m = AmplitudeModel::dynamic(kernel, CrossCovAnchors::new(times, mats).unwrap()).unwrap();
            let ts: Vec<f64> = (0..15).map(|_| rng.random::<f64>()).collect();
            let s = m.block_cov(&ts);
            assert!(min_eigenvalue(&s) >= -1e-8 * max_eigenvalue(&s));
        }
    }

    #[test]
    fn encode_decode_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mats: Vec<_> = (0..4).map(|_| random_spd(&mut rng, 3)).collect();
        let m = AmplitudeModel::dynamic(
            TemporalKernel::Product(vec![
                TemporalKernel::Mixture { a: 20.0 },
                TemporalKernel::Matern { alpha: 1.6, kappa: 0.12 },
            ]),
            CrossCovAnchors::new(vec![0.0, 0.4, 0.6, 1.0], mats).unwrap(),
        )
        .unwrap();
        let mut v = Vec::new();
        m.encode_into(&mut v).unwrap();
        let mut names = Vec::new();
        m.describe(&mut names);
        assert_eq!(v.len(), names.len());
        assert_eq!(v.len(), 3 + 4 * 6);
        let (back, used) = m.decode_from(&v).unwrap();
        assert_eq!(used, v.len());
        let mut v2 = Vec::new();
        back.encode_into(&mut v2).unwrap();
        for (a, b) in v.iter().zip(&v2) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(back.decode_from(&v[..5]).is_err());

        let noise = NoiseModel::new(vec![1.0, 2.5]).unwrap();
        let mut nv = Vec::new();
        noise.encode_into(&mut nv);
        assert!((noise.decode_from(&nv).unwrap().0.rho()[1] - 2.5).abs() < 1e-14);
        assert!(NoiseModel::new(vec![2.0, 1.0]).is_err());
    }

    #[test]
    fn unit_scalar_encodes_to_zero() {
        let k = TemporalKernel::Mixture { a: 1.0 };
        let mut v = Vec::new();
        k.encode_into(&mut v);
        assert_eq!(v, vec![0.0]);
    }
}
