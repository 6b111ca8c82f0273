//! Random warping functions `v(t, w) = t + s + E_w(t)`.
//!
//! `E_w` is the Hyman-filtered cubic Hermite interpolant of the deviations
//! `(0, w_1, ..., w_m, e_b)` at the nodes `(a, t_1, ..., t_m, b)`, where the
//! right boundary deviation `e_b` is either pinned to zero or extrapolated
//! from the last two deviations. Because the filtered slopes are piecewise
//! linear in `w`, the gradient with respect to the latent variables is exact.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngExt};
use rand_distr::StandardNormal;

use crate::covariance::{ParamInfo, ParamKind};
use crate::error::{invalid, Error, Result};
use crate::linalg::{cholesky_jittered, log_cholesky_decode, log_cholesky_encode, log_cholesky_len};
use crate::splines::{hermite_deriv_weights, hermite_weights, hyman_slopes, interval, BoundaryRule};

/// Relative minimum gap between consecutive warped anchor values.
pub const MONOTONE_GAP: f64 = 1e-6;

/// Anchor layout of the latent warp.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpModel {
    anchors: Vec<f64>,
    nodes: Vec<f64>,
    domain: (f64, f64),
    boundary: BoundaryRule,
    include_shift: bool,
}

impl WarpModel {
    /// `m_w` equidistant interior anchors on `domain`.
    pub fn new(m_w: usize, domain: (f64, f64), boundary: BoundaryRule, include_shift: bool) -> Result<Self> {
        let (a, b) = domain;
        let anchors = (1..=m_w).map(|k| a + k as f64 * (b - a) / (m_w + 1) as f64).collect();
        Self::with_anchors(anchors, domain, boundary, include_shift)
    }

    pub fn with_anchors(anchors: Vec<f64>, domain: (f64, f64), boundary: BoundaryRule, include_shift: bool) -> Result<Self> {
        let (a, b) = domain;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(invalid(format!("invalid warp domain [{a}, {b}]")));
        }
        if anchors.is_empty() {
            return Err(invalid("a warp needs at least one anchor"));
        }
        if anchors.iter().any(|&t| !(t > a && t < b)) || anchors.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("warp anchors must be sorted and strictly inside the domain"));
        }
        let mut nodes = Vec::with_capacity(anchors.len() + 2);
        nodes.push(a);
        nodes.extend_from_slice(&anchors);
        nodes.push(b);
        Ok(Self { anchors, nodes, domain, boundary, include_shift })
    }

    pub fn m_w(&self) -> usize {
        self.anchors.len()
    }

    pub fn anchors(&self) -> &[f64] {
        &self.anchors
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn boundary(&self) -> BoundaryRule {
        self.boundary
    }

    pub fn include_shift(&self) -> bool {
        self.include_shift
    }

    /// Number of latent coordinates: anchors plus the optional shift.
    pub fn latent_dim(&self) -> usize {
        self.m_w() + usize::from(self.include_shift)
    }

    fn gap(&self) -> f64 {
        MONOTONE_GAP * (self.domain.1 - self.domain.0)
    }

    /// Linear constraints `A x >= b` on the latent vector that keep the warped
    /// anchor sequence strictly increasing.
    pub fn constraints(&self) -> (DMatrix<f64>, DVector<f64>) {
        let m = self.m_w();
        let g = self.gap();
        let fixed = self.boundary == BoundaryRule::FixedBothEnds;
        let rows = m + usize::from(fixed);
        let mut a = DMatrix::zeros(rows, self.latent_dim());
        let mut b = DVector::zeros(rows);
        a[(0, 0)] = 1.0;
        b[0] = g - (self.nodes[1] - self.nodes[0]);
        for k in 1..m {
            a[(k, k)] = 1.0;
            a[(k, k - 1)] = -1.0;
            b[k] = g - (self.nodes[k + 1] - self.nodes[k]);
        }
        if fixed {
            a[(m, m - 1)] = -1.0;
            b[m] = g - (self.nodes[m + 1] - self.nodes[m]);
        }
        (a, b)
    }

    /// Whether the anchors of `latent` satisfy the monotone constraint.
    pub fn is_feasible(&self, latent: &LatentWarp) -> bool {
        if latent.w.len() != self.m_w() || latent.w.iter().any(|x| !x.is_finite()) {
            return false;
        }
        let (a, b) = self.constraints();
        let x = DVector::from_vec(latent.to_vec_padded(self));
        let slack = 1e-12 * (self.domain.1 - self.domain.0);
        (a * x - b).iter().all(|&r| r >= -slack)
    }

    fn check_latent(&self, latent: &LatentWarp) -> Result<()> {
        if latent.w.len() != self.m_w() {
            return Err(invalid(format!("latent has {} anchors, model has {}", latent.w.len(), self.m_w())));
        }
        if latent.shift.is_some() && !self.include_shift {
            return Err(invalid("latent carries a shift but the model has none"));
        }
        Ok(())
    }

    /// Precompute the interpolant for repeated evaluation.
    pub fn curve(&self, latent: &LatentWarp) -> Result<WarpCurve<'_>> {
        self.check_latent(latent)?;
        Ok(WarpCurve::build(self, &latent.w, latent.shift.unwrap_or(0.0)))
    }

    /// `v(t, w)`.
    pub fn eval(&self, latent: &LatentWarp, t: f64) -> Result<f64> {
        self.check_t(t)?;
        Ok(self.curve(latent)?.eval(t))
    }

    /// Gradient of `v(t, w)` with respect to `(w, s)`.
    pub fn grad(&self, latent: &LatentWarp, t: f64) -> Result<Vec<f64>> {
        self.check_t(t)?;
        let curve = self.curve(latent)?;
        let mut g = vec![0.0; self.latent_dim()];
        curve.grad_into(t, &mut g);
        Ok(g)
    }

    fn check_t(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.domain;
        if !(lo..=hi).contains(&t) {
            return Err(Error::Domain { value: t, lo, hi });
        }
        Ok(())
    }
}

/// Free-function form of [`WarpModel::eval`].
pub fn warp_eval(model: &WarpModel, latent: &LatentWarp, t: f64) -> Result<f64> {
    model.eval(latent, t)
}

/// Free-function form of [`WarpModel::grad`].
pub fn warp_grad(model: &WarpModel, latent: &LatentWarp, t: f64) -> Result<Vec<f64>> {
    model.grad(latent, t)
}

/// Latent anchor deviations and optional shift of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentWarp {
    pub w: Vec<f64>,
    pub shift: Option<f64>,
}

impl LatentWarp {
    pub fn identity(model: &WarpModel) -> Self {
        Self { w: vec![0.0; model.m_w()], shift: model.include_shift().then_some(0.0) }
    }

    /// Flat latent vector `(w, s)`, with `s = 0` when the model has a shift
    /// but the latent does not.
    pub fn to_vec_padded(&self, model: &WarpModel) -> Vec<f64> {
        let mut v = self.w.clone();
        if model.include_shift() {
            v.push(self.shift.unwrap_or(0.0));
        }
        v
    }

    pub fn from_slice(model: &WarpModel, v: &[f64]) -> Self {
        let m = model.m_w();
        Self { w: v[..m].to_vec(), shift: model.include_shift().then(|| v[m]) }
    }
}

/// A realized warp with precomputed deviations, slopes and their Jacobians.
#[derive(Debug, Clone)]
pub struct WarpCurve<'a> {
    model: &'a WarpModel,
    e: Vec<f64>,
    slopes: Vec<f64>,
    // node-major Jacobians of deviations and slopes with respect to w
    de: Vec<f64>,
    dm: Vec<f64>,
    shift: f64,
}

impl<'a> WarpCurve<'a> {
    fn build(model: &'a WarpModel, w: &[f64], shift: f64) -> Self {
        let x = &model.nodes;
        let n = x.len();
        let m = w.len();
        let mut e = vec![0.0; n];
        let mut de = vec![0.0; n * m];
        for k in 0..m {
            e[k + 1] = w[k];
            de[(k + 1) * m + k] = 1.0;
        }
        if model.boundary == BoundaryRule::ExtrapolateRight {
            let r = (x[n - 1] - x[m]) / (x[m] - x[m - 1]);
            e[n - 1] = e[m] + r * (e[m] - e[m - 1]);
            de[(n - 1) * m + (m - 1)] = 1.0 + r;
            if m >= 2 {
                de[(n - 1) * m + (m - 2)] = -r;
            }
        }
        let secants: Vec<f64> = (0..n - 1).map(|i| 1.0 + (e[i + 1] - e[i]) / (x[i + 1] - x[i])).collect();
        let (slopes_u, derivs) = hyman_slopes(x, &secants);
        let slopes: Vec<f64> = slopes_u.iter().map(|s| s - 1.0).collect();
        let mut dm = vec![0.0; n * m];
        for (i, d) in derivs.iter().enumerate() {
            for &(j, coef) in &d.terms {
                if coef == 0.0 {
                    continue;
                }
                let h = x[j + 1] - x[j];
                for l in 0..m {
                    dm[i * m + l] += coef * (de[(j + 1) * m + l] - de[j * m + l]) / h;
                }
            }
        }
        Self { model, e, slopes, de, dm, shift }
    }

    /// Deviation `E_w(t)`; linear continuation outside the nodes.
    pub fn deviation(&self, t: f64) -> f64 {
        let x = &self.model.nodes;
        let n = x.len();
        if t < x[0] {
            return self.e[0] + (t - x[0]) * self.slopes[0];
        }
        if t > x[n - 1] {
            return self.e[n - 1] + (t - x[n - 1]) * self.slopes[n - 1];
        }
        let i = interval(x, t);
        let h = hermite_weights(x[i], x[i + 1], t);
        h[0] * self.e[i] + h[1] * self.slopes[i] + h[2] * self.e[i + 1] + h[3] * self.slopes[i + 1]
    }

    pub fn eval(&self, t: f64) -> f64 {
        t + self.shift + self.deviation(t)
    }

    /// `dv/dt`.
    pub fn time_deriv(&self, t: f64) -> f64 {
        let x = &self.model.nodes;
        let n = x.len();
        if t < x[0] {
            return 1.0 + self.slopes[0];
        }
        if t > x[n - 1] {
            return 1.0 + self.slopes[n - 1];
        }
        let i = interval(x, t);
        let h = hermite_deriv_weights(x[i], x[i + 1], t);
        1.0 + h[0] * self.e[i] + h[1] * self.slopes[i] + h[2] * self.e[i + 1] + h[3] * self.slopes[i + 1]
    }

    /// Writes `d v(t) / d(w, s)` into `out` (length `latent_dim`).
    pub fn grad_into(&self, t: f64, out: &mut [f64]) {
        let x = &self.model.nodes;
        let n = x.len();
        let m = self.model.m_w();
        let (i, wts) = if t < x[0] {
            (0, [1.0, t - x[0], 0.0, 0.0])
        } else if t > x[n - 1] {
            (n - 2, [0.0, 0.0, 1.0, t - x[n - 1]])
        } else {
            let i = interval(x, t);
            (i, hermite_weights(x[i], x[i + 1], t))
        };
        for (l, o) in out.iter_mut().enumerate().take(m) {
            *o = wts[0] * self.de[i * m + l]
                + wts[1] * self.dm[i * m + l]
                + wts[2] * self.de[(i + 1) * m + l]
                + wts[3] * self.dm[(i + 1) * m + l];
        }
        if self.model.include_shift {
            out[m] = 1.0;
        }
    }
}

/// Structure of the latent warp covariance `C` (relative to `sigma^2`).
#[derive(Debug, Clone, PartialEq)]
pub enum WarpCovFamily {
    /// `tau^2 min(s_k, s_l)` at the normalized anchor positions.
    BrownianMotion { tau: f64 },
    /// `tau^2 (min(s_k, s_l) - s_k s_l)`.
    BrownianBridge { tau: f64 },
    /// Arbitrary symmetric positive definite `m_w x m_w` matrix.
    Unstructured(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarpCovariance {
    pub family: WarpCovFamily,
    /// Standard deviation of the random shift, required when the warp model has one.
    pub shift_sd: Option<f64>,
}

impl WarpCovariance {
    pub fn bridge(tau: f64) -> Self {
        Self { family: WarpCovFamily::BrownianBridge { tau }, shift_sd: None }
    }

    pub fn motion(tau: f64) -> Self {
        Self { family: WarpCovFamily::BrownianMotion { tau }, shift_sd: None }
    }

    pub fn with_shift(mut self, sd: f64) -> Self {
        self.shift_sd = Some(sd);
        self
    }

    pub fn validate(&self, model: &WarpModel) -> Result<()> {
        match &self.family {
            WarpCovFamily::BrownianMotion { tau } | WarpCovFamily::BrownianBridge { tau } => {
                if !(tau.is_finite() && *tau > 0.0) {
                    return Err(invalid(format!("warp scale must be positive (got {tau})")));
                }
            }
            WarpCovFamily::Unstructured(c) => {
                let m = model.m_w();
                if c.nrows() != m || c.ncols() != m {
                    return Err(invalid(format!("unstructured warp covariance must be {m}x{m}")));
                }
                if c.clone().cholesky().is_none() {
                    return Err(invalid("unstructured warp covariance is not positive definite"));
                }
            }
        }
        match (model.include_shift(), self.shift_sd) {
            (true, None) => Err(invalid("warp model has a shift but no shift standard deviation")),
            (_, Some(sd)) if !(sd.is_finite() && sd > 0.0) => Err(invalid("shift standard deviation must be positive")),
            _ => Ok(()),
        }
    }

    /// Covariance of the latent vector `(w, s)`.
    pub fn matrix(&self, model: &WarpModel) -> DMatrix<f64> {
        let m = model.m_w();
        let d = model.latent_dim();
        let (a, b) = model.domain();
        let pos: Vec<f64> = model.anchors().iter().map(|t| (t - a) / (b - a)).collect();
        let mut c = DMatrix::zeros(d, d);
        match &self.family {
            WarpCovFamily::BrownianMotion { tau } => {
                for k in 0..m {
                    for l in 0..m {
                        c[(k, l)] = tau * tau * pos[k].min(pos[l]);
                    }
                }
            }
            WarpCovFamily::BrownianBridge { tau } => {
                for k in 0..m {
                    for l in 0..m {
                        c[(k, l)] = tau * tau * (pos[k].min(pos[l]) - pos[k] * pos[l]);
                    }
                }
            }
            WarpCovFamily::Unstructured(u) => c.view_mut((0, 0), (m, m)).copy_from(u),
        }
        if model.include_shift() {
            let sd = self.shift_sd.unwrap_or(0.0);
            c[(m, m)] = sd * sd;
        }
        c
    }

    pub(crate) fn describe(&self, model: &WarpModel, out: &mut Vec<ParamInfo>) {
        match &self.family {
            WarpCovFamily::BrownianMotion { .. } | WarpCovFamily::BrownianBridge { .. } => {
                out.push(ParamInfo { name: "warp.log_tau".into(), kind: ParamKind::WarpScale })
            }
            WarpCovFamily::Unstructured(c) => {
                let m = c.nrows();
                for i in 0..m {
                    for j in 0..=i {
                        out.push(ParamInfo { name: format!("warp.C.L{}{}", i + 1, j + 1), kind: ParamKind::WarpScale });
                    }
                }
            }
        }
        if model.include_shift() {
            out.push(ParamInfo { name: "warp.log_shift_sd".into(), kind: ParamKind::ShiftScale });
        }
    }

    pub(crate) fn encode_into(&self, model: &WarpModel, out: &mut Vec<f64>) -> Result<()> {
        match &self.family {
            WarpCovFamily::BrownianMotion { tau } | WarpCovFamily::BrownianBridge { tau } => out.push(tau.ln()),
            WarpCovFamily::Unstructured(c) => out.extend(log_cholesky_encode(c)?),
        }
        if model.include_shift() {
            out.push(self.shift_sd.unwrap_or(1.0).ln());
        }
        Ok(())
    }

    pub(crate) fn decode_from(&self, model: &WarpModel, v: &[f64]) -> Result<(Self, usize)> {
        let short = || invalid("encoded warp vector too short");
        let (family, mut used) = match &self.family {
            WarpCovFamily::BrownianMotion { .. } => {
                (WarpCovFamily::BrownianMotion { tau: v.first().ok_or_else(short)?.exp() }, 1)
            }
            WarpCovFamily::BrownianBridge { .. } => {
                (WarpCovFamily::BrownianBridge { tau: v.first().ok_or_else(short)?.exp() }, 1)
            }
            WarpCovFamily::Unstructured(c) => {
                let len = log_cholesky_len(c.nrows());
                if v.len() < len {
                    return Err(short());
                }
                (WarpCovFamily::Unstructured(log_cholesky_decode(&v[..len], c.nrows())?), len)
            }
        };
        let shift_sd = if model.include_shift() {
            let x = v.get(used).ok_or_else(short)?.exp();
            used += 1;
            Some(x)
        } else {
            self.shift_sd
        };
        Ok((Self { family, shift_sd }, used))
    }

    /// Multiply all variances by `factor`.
    pub fn rescaled(&self, factor: f64) -> Self {
        let r = factor.sqrt();
        let family = match &self.family {
            WarpCovFamily::BrownianMotion { tau } => WarpCovFamily::BrownianMotion { tau: tau * r },
            WarpCovFamily::BrownianBridge { tau } => WarpCovFamily::BrownianBridge { tau: tau * r },
            WarpCovFamily::Unstructured(c) => WarpCovFamily::Unstructured(c * factor),
        };
        Self { family, shift_sd: self.shift_sd.map(|s| s * r) }
    }
}

/// Draws latent warps from `N(0, cov)` restricted to the monotone region.
#[derive(Debug, Clone)]
pub struct WarpSampler<'a> {
    model: &'a WarpModel,
    factor: DMatrix<f64>,
    max_attempts: usize,
}

impl<'a> WarpSampler<'a> {
    /// `cov` is the covariance of the latent vector (already scaled).
    pub fn new(model: &'a WarpModel, cov: &DMatrix<f64>) -> Result<Self> {
        let d = model.latent_dim();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(invalid("latent covariance has the wrong dimension"));
        }
        let scale = cov.diagonal().max().max(f64::MIN_POSITIVE);
        let normalized = cov / scale;
        let (chol, _) = cholesky_jittered(&normalized, 1e-12, 1e-8)?;
        Ok(Self { model, factor: chol.l() * scale.sqrt(), max_attempts: 10_000 })
    }

    pub fn draw_unconstrained<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.factor.nrows();
        let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        (&self.factor * z).iter().copied().collect()
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<LatentWarp> {
        for _ in 0..self.max_attempts {
            let v = self.draw_unconstrained(rng);
            let latent = LatentWarp::from_slice(self.model, &v);
            if self.model.is_feasible(&latent) {
                return Ok(latent);
            }
        }
        Err(Error::Sampling(format!(
            "no monotone warp after {} draws; the warp covariance scale is too large",
            self.max_attempts
        )))
    }
}

/// `count` monotone latent warps drawn from `N(0, C)` by rejection.
pub fn simulate_warps(model: &WarpModel, cov: &WarpCovariance, count: usize, seed: u64) -> Result<Vec<LatentWarp>> {
    use rand::SeedableRng;
    cov.validate(model)?;
    let sampler = WarpSampler::new(model, &cov.matrix(model))?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sampler.draw(&mut rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn models() -> Vec<WarpModel> {
        vec![
            WarpModel::new(3, (0.0, 1.0), BoundaryRule::FixedBothEnds, false).unwrap(),
            WarpModel::new(5, (0.0, 1.0), BoundaryRule::ExtrapolateRight, true).unwrap(),
            WarpModel::new(1, (5.0, 20.0), BoundaryRule::ExtrapolateRight, false).unwrap(),
            WarpModel::new(4, (0.0, 2.0), BoundaryRule::FixedBothEnds, true).unwrap(),
        ]
    }

    fn random_feasible(model: &WarpModel, rng: &mut ChaCha8Rng, scale: f64) -> LatentWarp {
        let (lo, hi) = model.domain();
        loop {
            let w: Vec<f64> = (0..model.m_w()).map(|_| scale * (hi - lo) * (rng.random::<f64>() - 0.5)).collect();
            let shift = model.include_shift().then(|| 0.1 * (rng.random::<f64>() - 0.5));
            let l = LatentWarp { w, shift };
            if model.is_feasible(&l) {
                return l;
            }
        }
    }

    #[test]
    fn zero_latent_is_exact_identity() {
        for model in models() {
            let id = LatentWarp::identity(&model);
            let (a, b) = model.domain();
            for i in 0..=200 {
                let t = a + (b - a) * i as f64 / 200.0;
                assert_eq!(warp_eval(&model, &id, t).unwrap(), t);
            }
        }
    }

    #[test]
    fn pure_shift() {
        let model = WarpModel::new(3, (0.0, 1.0), BoundaryRule::FixedBothEnds, true).unwrap();
        let l = LatentWarp { w: vec![0.0; 3], shift: Some(0.05) };
        assert!((warp_eval(&model, &l, 0.3).unwrap() - 0.35).abs() < 1e-15);
        let g = warp_grad(&model, &l, 0.3).unwrap();
        assert_eq!(g[3], 1.0);
    }

    #[test]
    fn bridge_endpoints_fixed() {
        let model = WarpModel::new(4, (0.0, 1.0), BoundaryRule::FixedBothEnds, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let l = random_feasible(&model, &mut rng, 0.3);
            assert_eq!(warp_eval(&model, &l, 0.0).unwrap(), 0.0);
            assert_eq!(warp_eval(&model, &l, 1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn gradient_at_anchor_is_cardinal() {
        let model = WarpModel::new(4, (0.0, 1.0), BoundaryRule::FixedBothEnds, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let l = random_feasible(&model, &mut rng, 0.2);
        for (k, &t) in model.anchors().iter().enumerate() {
            let g = warp_grad(&model, &l, t).unwrap();
            for (j, gj) in g.iter().enumerate() {
                assert_eq!(*gj, if j == k { 1.0 } else { 0.0 });
            }
            assert!((warp_eval(&model, &l, t).unwrap() - t - l.w[k]).abs() < 1e-15);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-6;
        for model in models() {
            let (a, b) = model.domain();
            for _ in 0..100 {
                let l = random_feasible(&model, &mut rng, 0.15);
                let t = a + (b - a) * rng.random::<f64>();
                let g = warp_grad(&model, &l, t).unwrap();
                let base = l.to_vec_padded(&model);
                for j in 0..base.len() {
                    let mut p = base.clone();
                    let mut q = base.clone();
                    p[j] += h;
                    q[j] -= h;
                    let fd = (warp_eval(&model, &LatentWarp::from_slice(&model, &p), t).unwrap()
                        - warp_eval(&model, &LatentWarp::from_slice(&model, &q), t).unwrap())
                        / (2.0 * h);
                    let err = (fd - g[j]).abs() / g[j].abs().max(1.0);
                    assert!(err < 1e-5, "t={t} j={j}: {fd} vs {}", g[j]);
                }
            }
        }
    }

    #[test]
    fn feasible_latents_give_increasing_warps() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for model in models() {
            let (a, b) = model.domain();
            for _ in 0..50 {
                let l = random_feasible(&model, &mut rng, 0.4);
                let curve = model.curve(&l).unwrap();
                let mut prev = f64::NEG_INFINITY;
                for i in 0..1000 {
                    let v = curve.eval(a + (b - a) * i as f64 / 999.0);
                    assert!(v >= prev);
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn time_derivative_matches_differences() {
        let model = WarpModel::new(3, (0.0, 1.0), BoundaryRule::ExtrapolateRight, false).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l = random_feasible(&model, &mut rng, 0.2);
        let c = model.curve(&l).unwrap();
        for t in [0.1, 0.33, 0.6, 0.9] {
            let fd = (c.eval(t + 1e-6) - c.eval(t - 1e-6)) / 2e-6;
            assert!((fd - c.time_deriv(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn constraint_rows_match_anchor_increments() {
        let model = WarpModel::new(3, (0.0, 1.0), BoundaryRule::FixedBothEnds, false).unwrap();
        let (a, b) = model.constraints();
        assert_eq!(a.nrows(), 4);
        // w = (-0.25, 0, 0): first warped anchor hits the left boundary
        let bad = LatentWarp { w: vec![-0.25, 0.0, 0.0], shift: None };
        assert!(!model.is_feasible(&bad));
        let ok = LatentWarp { w: vec![-0.2, 0.0, 0.2], shift: None };
        assert!(model.is_feasible(&ok));
        let x = DVector::from_vec(ok.w.clone());
        assert!((a * x - b).iter().all(|r| *r > 0.0));
    }

    #[test]
    fn out_of_domain_rejected() {
        let model = WarpModel::new(2, (0.0, 1.0), BoundaryRule::FixedBothEnds, false).unwrap();
        let l = LatentWarp::identity(&model);
        assert!(matches!(warp_eval(&model, &l, 1.5), Err(Error::Domain { .. })));
        assert!(WarpModel::with_anchors(vec![0.5, 0.5], (0.0, 1.0), BoundaryRule::FixedBothEnds, false).is_err());
    }

    #[test]
    fn bridge_covariance_at_anchors() {
        let model = WarpModel::new(3, (0.0, 1.0), BoundaryRule::FixedBothEnds, false).unwrap();
        let c = WarpCovariance::bridge(2.0).matrix(&model);
        assert!((c[(0, 0)] - 4.0 * (0.25 - 0.0625)).abs() < 1e-15);
        assert!((c[(0, 2)] - 4.0 * (0.25 - 0.25 * 0.75)).abs() < 1e-15);
        let m = WarpModel::new(3, (0.0, 1.0), BoundaryRule::FixedBothEnds, true).unwrap();
        assert!(WarpCovariance::bridge(1.0).validate(&m).is_err());
        let c = WarpCovariance::bridge(1.0).with_shift(0.5).matrix(&m);
        assert_eq!(c[(3, 3)], 0.25);
        assert_eq!(c[(0, 3)], 0.0);
    }

    #[test]
    fn bridge_draws_are_monotone_with_fixed_endpoints() {
        let model = WarpModel::new(5, (0.0, 1.0), BoundaryRule::FixedBothEnds, false).unwrap();
        let draws = simulate_warps(&model, &WarpCovariance::bridge(0.2), 200, 1).unwrap();
        for l in &draws {
            assert!(model.is_feasible(l));
            assert_eq!(model.eval(l, 0.0).unwrap(), 0.0);
            assert_eq!(model.eval(l, 1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn motion_desynchronization_grows() {
        let model = WarpModel::new(5, (0.0, 1.0), BoundaryRule::ExtrapolateRight, false).unwrap();
        let draws = simulate_warps(&model, &WarpCovariance::motion(0.1), 1000, 9).unwrap();
        let grid = [0.1, 0.3, 0.5, 0.7, 0.9, 1.0];
        let vars: Vec<f64> = grid
            .iter()
            .map(|&t| {
                let d: Vec<f64> = draws.iter().map(|l| model.eval(l, t).unwrap() - t).collect();
                let mean = d.iter().sum::<f64>() / d.len() as f64;
                d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64
            })
            .collect();
        assert!(vars.windows(2).all(|w| w[1] > w[0]), "{vars:?}");
    }

    #[test]
    fn degenerate_scale_stays_at_identity() {
        let model = WarpModel::new(3, (0.0, 1.0), BoundaryRule::FixedBothEnds, false).unwrap();
        let draws = simulate_warps(&model, &WarpCovariance::bridge(1e-8), 100, 4).unwrap();
        for l in &draws {
            for i in 0..=100 {
                let t = i as f64 / 100.0;
                assert!((model.eval(l, t).unwrap() - t).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let model = WarpModel::new(3, (0.0, 1.0), BoundaryRule::FixedBothEnds, true).unwrap();
        let cov = WarpCovariance::bridge(0.3).with_shift(0.05);
        assert_eq!(simulate_warps(&model, &cov, 20, 3).unwrap(), simulate_warps(&model, &cov, 20, 3).unwrap());
    }

    #[test]
    fn unconstrained_sample_covariance_matches() {
        let model = WarpModel::new(3, (0.0, 1.0), BoundaryRule::FixedBothEnds, true).unwrap();
        let cov = WarpCovariance::bridge(0.5).with_shift(0.1).matrix(&model);
        let sampler = WarpSampler::new(&model, &cov).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let d = model.latent_dim();
        let mut acc = DMatrix::<f64>::zeros(d, d);
        let mut acc2 = DMatrix::<f64>::zeros(d, d);
        for _ in 0..n {
            let v = DVector::from_vec(sampler.draw_unconstrained(&mut rng));
            let outer = &v * v.transpose();
            acc2 += outer.component_mul(&outer);
            acc += outer;
        }
        let mean = &acc / n as f64;
        for i in 0..d {
            for j in 0..d {
                let var = acc2[(i, j)] / n as f64 - mean[(i, j)].powi(2);
                let se = (var / n as f64).sqrt();
                assert!((mean[(i, j)] - cov[(i, j)]).abs() <= 3.0 * se + 1e-15, "({i},{j})");
            }
        }
    }

    #[test]
    fn encode_round_trip() {
        let model = WarpModel::new(3, (0.0, 1.0), BoundaryRule::FixedBothEnds, true).unwrap();
        let cov = WarpCovariance::bridge(0.3).with_shift(0.05);
        let mut v = Vec::new();
        cov.encode_into(&model, &mut v).unwrap();
        let (back, used) = cov.decode_from(&model, &v).unwrap();
        assert_eq!(used, 2);
        assert!((back.matrix(&model) - cov.matrix(&model)).abs().max() < 1e-15);
    }
}
