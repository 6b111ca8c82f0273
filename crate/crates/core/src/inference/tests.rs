use nalgebra::{DMatrix, DVector};

use super::*;
use crate::covariance::{AmplitudeModel, NoiseModel, TemporalKernel};
use crate::data::{DataSet, FunctionalSample};
use crate::model::{ModelSpec, VarianceParams};
use crate::optim::{golden_section, BfgsOptions};
use crate::splines::{BasisMode, BoundaryRule, SplineBasis};
use crate::tasks::{simulate, SimulationSpec};
use crate::warp::{LatentWarp, WarpCovariance, WarpModel};

const GRID: usize = 25;
const K: usize = 6;

fn grid() -> Vec<f64> {
    (0..GRID).map(|i| i as f64 / (GRID - 1) as f64).collect()
}

fn params(q: usize, tau: f64, amp_scale: f64) -> VarianceParams {
    let rho = if q == 1 { vec![1.0] } else { (0..q).map(|j| 1.0 + j as f64).collect() };
    VarianceParams {
        warp: WarpCovariance::bridge(tau).with_shift(0.05),
        amplitude: AmplitudeModel::diagonal(TemporalKernel::Mixture { a: 0.3 }, vec![amp_scale; q]).unwrap(),
        noise: NoiseModel::new(rho).unwrap(),
    }
}

fn spec(q: usize, tau: f64, amp_scale: f64) -> ModelSpec {
    let basis = SplineBasis::equidistant(3, K - 4, (0.0, 1.0), BasisMode::Standard).unwrap();
    let warp = WarpModel::new(3, (0.0, 1.0), BoundaryRule::FixedBothEnds, true).unwrap();
    ModelSpec::new(basis, warp, params(q, tau, amp_scale)).unwrap()
}

fn template(k: usize, q: usize, steep: f64) -> DMatrix<f64> {
    DMatrix::from_fn(k, q, |i, j| steep * ((i as f64) * 0.9 + j as f64).sin() + 0.2 * i as f64)
}

fn latent(model: &WarpModel, w: &[f64], shift: f64) -> LatentWarp {
    LatentWarp { w: w.to_vec(), shift: model.include_shift().then_some(shift) }
}

/// Values of `theta(v(t))` at the grid, plus an optional additive perturbation.
fn curve_sample(spec: &ModelSpec, coef: &DMatrix<f64>, lat: &LatentWarp, noise: impl Fn(usize) -> f64, missing: &[usize]) -> FunctionalSample {
    let q = coef.ncols();
    let mut values = Vec::new();
    for &t in &grid() {
        let v = spec.warp.eval(lat, t).unwrap().clamp(0.0, 1.0);
        let b = spec.basis.eval(v).unwrap();
        for j in 0..q {
            values.push((0..b.len()).map(|c| b[c] * coef[(c, j)]).sum::<f64>());
        }
    }
    for (i, v) in values.iter_mut().enumerate() {
        *v += noise(i);
    }
    for &i in missing {
        values[i] = f64::NAN;
    }
    FunctionalSample::new("x", 0, grid(), q, values).unwrap()
}

fn wiggle(i: usize) -> f64 {
    0.3 * ((i as f64) * 1.7).sin() + 0.1 * ((i as f64) * 0.37).cos()
}

/// Dense `S + diag(rho)` from the kernel formula, restricted to observed entries.
fn dense_sigma(p: &VarianceParams, sample: &FunctionalSample, scale: f64) -> DMatrix<f64> {
    let q = sample.q();
    let obs = sample.observed();
    let t = sample.times();
    let rho = p.noise.rho();
    DMatrix::from_fn(obs.len(), obs.len(), |a, b| {
        let (ka, ja) = (obs[a] / q, obs[a] % q);
        let (kb, jb) = (obs[b] / q, obs[b] % q);
        let (s, u) = (t[ka], t[kb]);
        let mut v = if ja == jb { scale * scale * (0.3 + s.min(u) - s * u) } else { 0.0 };
        if a == b {
            v += rho[ja];
        }
        v
    })
}

fn log_det(m: &DMatrix<f64>) -> f64 {
    m.clone().lu().determinant().ln()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn posterior_is_zero_for_exact_identity_data() {
    let s = spec(2, 0.2, 0.5);
    let coef = template(K, 2, 1.0);
    let id = LatentWarp::identity(&s.warp);
    let sample = curve_sample(&s, &coef, &id, |_| 0.0, &[]);
    assert!(neg_log_posterior(&s, &s.params, &sample, &id, &coef).unwrap().abs() < 1e-20);
}

#[test]
fn posterior_reduces_to_squared_error_without_amplitude() {
    let s = spec(1, 1.0, 1e-200);
    let coef = template(K, 1, 1.0);
    let lat = latent(&s.warp, &[0.03, -0.02, 0.01], 0.04);
    let sample = curve_sample(&s, &coef, &lat, wiggle, &[]);
    let id = LatentWarp::identity(&s.warp);
    let fit = curve_sample(&s, &coef, &id, |_| 0.0, &[]);
    let sse: f64 = sample.values().iter().zip(fit.values()).map(|(a, b)| (a - b).powi(2)).sum();
    let got = neg_log_posterior(&s, &s.params, &sample, &id, &coef).unwrap();
    assert!(rel(got, sse) < 1e-12, "{got} vs {sse}");
}

#[test]
fn posterior_matches_dense_inverse() {
    let s = spec(2, 0.3, 0.7);
    let coef = template(K, 2, 1.0);
    let truth = latent(&s.warp, &[0.05, 0.02, -0.03], 0.01);
    let sample = curve_sample(&s, &coef, &truth, wiggle, &[3, 10, 11]);
    let at = latent(&s.warp, &[0.02, -0.01, 0.04], -0.02);
    let fitted = curve_sample(&s, &coef, &at, |_| 0.0, &[3, 10, 11]);
    let r = DVector::from_iterator(sample.n_obs(), sample.observed().iter().map(|&i| fitted.values()[i] - sample.values()[i]));
    let sig = dense_sigma(&s.params, &sample, 0.7);
    let c = s.params.warp_matrix(&s.warp);
    let w = DVector::from_vec(at.to_vec_padded(&s.warp));
    let oracle = (r.transpose() * sig.try_inverse().unwrap() * &r)[0] + (w.transpose() * c.try_inverse().unwrap() * &w)[0];
    let got = neg_log_posterior(&s, &s.params, &sample, &at, &coef).unwrap();
    assert!(rel(got, oracle) < 1e-9, "{got} vs {oracle}");
}

#[test]
fn linearization_matches_finite_differences() {
    let s = spec(2, 0.3, 0.5);
    let coef = template(K, 2, 1.0);
    let at = latent(&s.warp, &[0.04, -0.02, 0.03], 0.02);
    let sample = curve_sample(&s, &coef, &at, wiggle, &[5]);
    let lin = linearize(&s, &sample, &at, &coef).unwrap();
    let p = s.warp.latent_dim();
    assert_eq!((lin.z.nrows(), lin.z.ncols()), (sample.n_obs(), p));
    assert_eq!(lin.gamma0.len(), sample.n_obs());
    let h = 1e-6;
    let w0 = at.to_vec_padded(&s.warp);
    for l in 0..p {
        let mut up = w0.clone();
        let mut dn = w0.clone();
        up[l] += h;
        dn[l] -= h;
        let gu = linearize(&s, &sample, &LatentWarp::from_slice(&s.warp, &up), &coef).unwrap().gamma0;
        let gd = linearize(&s, &sample, &LatentWarp::from_slice(&s.warp, &dn), &coef).unwrap().gamma0;
        let fd = (gu - gd) / (2.0 * h);
        let err = (&fd - lin.z.column(l)).abs().max();
        assert!(err < 1e-5, "column {l}: {err}");
    }
}

#[test]
fn constant_template_has_zero_jacobian() {
    let s = spec(1, 0.3, 0.5);
    let coef = DMatrix::from_element(K, 1, 2.5);
    let at = latent(&s.warp, &[0.04, -0.02, 0.03], 0.02);
    let sample = curve_sample(&s, &coef, &at, wiggle, &[]);
    let lin = linearize(&s, &sample, &at, &coef).unwrap();
    assert!(lin.z.abs().max() < 1e-12);
    assert!((lin.gamma0.add_scalar(-2.5)).abs().max() < 1e-12);
}

fn small_data(s: &ModelSpec, coef: &DMatrix<f64>, n: usize, missing: bool) -> (DataSet, Vec<LatentWarp>) {
    let mut samples = Vec::new();
    let mut lats = Vec::new();
    for i in 0..n {
        let f = i as f64;
        let lat = latent(&s.warp, &[0.02 * (f * 1.3).sin(), 0.03 * (f * 0.7).cos(), -0.01 * f.sin()], 0.01 * (f * 2.1).sin());
        let miss: Vec<usize> = if missing && i % 2 == 1 { vec![1, 20] } else { vec![] };
        let mut smp = curve_sample(s, coef, &lat, |k| wiggle(k + 7 * i), &miss);
        smp.id = format!("n{i}");
        samples.push(smp);
        lats.push(lat);
    }
    (DataSet::with_subject_count(samples, 1).unwrap(), lats)
}

#[test]
fn profile_with_unit_covariance_is_mean_square() {
    let s = spec(1, 0.3, 1e-200);
    let coef = DMatrix::from_element(K, 1, 1.0);
    let (data, lats) = small_data(&s, &coef, 4, false);
    let lins = linearize_all(&s, &data, &lats, std::slice::from_ref(&coef)).unwrap();
    let m = data.n_obs() as f64;
    let rss: f64 = lins.iter().map(|l| l.residual().norm_squared()).sum();
    let pv = profile_nll(&s, &s.params, &data, &lins).unwrap();
    assert!(rel(pv.sigma2, rss / m) < 1e-12);
    assert!(rel(pv.value, m * (rss / m).ln() + m) < 1e-12);
}

#[test]
fn profile_matches_dense_oracle_and_profiled_scale() {
    let s = spec(2, 0.3, 0.6);
    let coef = template(K, 2, 1.5);
    let (data, lats) = small_data(&s, &coef, 5, true);
    let lins = linearize_all(&s, &data, &lats, std::slice::from_ref(&coef)).unwrap();
    let mut quad = 0.0;
    let mut logdet = 0.0;
    for (n, lin) in lins.iter().enumerate() {
        let smp = data.sample(n);
        let z = &lin.z;
        let v = z * s.params.warp_matrix(&s.warp) * z.transpose() + dense_sigma(&s.params, smp, 0.6);
        let r = lin.residual();
        quad += (r.transpose() * v.clone().try_inverse().unwrap() * &r)[0];
        logdet += log_det(&v);
    }
    let m = data.n_obs() as f64;
    let pv = profile_nll(&s, &s.params, &data, &lins).unwrap();
    let oracle = m * (quad / m).ln() + logdet + m;
    assert!(rel(pv.value, oracle) < 1e-8, "{} vs {oracle}", pv.value);
    let crit = |ls2: f64| m * ls2 + logdet + quad / ls2.exp();
    let best = golden_section(crit, -10.0, 10.0, 1e-10).exp();
    assert!(rel(pv.sigma2, best) < 1e-6, "{} vs {best}", pv.sigma2);
}

#[test]
fn moments_match_joint_gaussian_conditioning() {
    let s = spec(2, 0.3, 0.6);
    let coef = template(K, 2, 1.5);
    let at = latent(&s.warp, &[0.03, 0.01, -0.02], 0.02);
    let sample = curve_sample(&s, &coef, &latent(&s.warp, &[0.05, 0.0, 0.02], -0.01), wiggle, &[4]);
    let lin = linearize(&s, &sample, &at, &coef).unwrap();
    let sigma2 = 0.7;
    let (mean, cov) = conditional_warp_moments(&s, &s.params, &sample, &lin, sigma2).unwrap();
    let c = s.params.warp_matrix(&s.warp);
    let v = &lin.z * &c * lin.z.transpose() + dense_sigma(&s.params, &sample, 0.6);
    let vi = v.try_inverse().unwrap();
    let gain = &c * lin.z.transpose() * &vi;
    let mean_o = &gain * lin.residual();
    let cov_o = (&c - &gain * &lin.z * &c) * sigma2;
    assert!((&mean - &mean_o).abs().max() < 1e-8 * (1.0 + mean_o.abs().max()));
    assert!((&cov - &cov_o).abs().max() < 1e-8 * cov_o.abs().max());
    let gap = &c * sigma2 - &cov;
    assert!(crate::linalg::min_eigenvalue(&gap) > -1e-12);
    assert!((&cov - cov.transpose()).abs().max() == 0.0);
}

#[test]
fn moments_without_information_recover_prior() {
    let s = spec(1, 0.3, 0.6);
    let coef = DMatrix::from_element(K, 1, 1.0);
    let at = latent(&s.warp, &[0.03, 0.01, -0.02], 0.02);
    let sample = curve_sample(&s, &coef, &at, wiggle, &[]);
    let lin = linearize(&s, &sample, &at, &coef).unwrap();
    let (mean, cov) = conditional_warp_moments(&s, &s.params, &sample, &lin, 2.0).unwrap();
    assert!(mean.abs().max() < 1e-12);
    assert!((cov - s.params.warp_matrix(&s.warp) * 2.0).abs().max() < 1e-12);
}

#[test]
fn warp_prediction_stays_at_identity_for_unwarped_data() {
    let s = spec(2, 0.3, 0.5);
    let coef = template(K, 2, 2.0);
    let id = LatentWarp::identity(&s.warp);
    let sample = curve_sample(&s, &coef, &id, |_| 0.0, &[]);
    let start = latent(&s.warp, &[0.05, 0.02, -0.04], 0.03);
    let p = predict_warp(&s, &s.params, &sample, &coef, &start).unwrap();
    let w = DVector::from_vec(p.latent.to_vec_padded(&s.warp));
    assert!(w.norm() < 1e-6, "{w}");
    assert!(p.objective <= p.initial_objective);
    assert!(s.warp.is_feasible(&p.latent));
}

#[test]
fn warp_prediction_recovers_true_warp_under_weak_prior() {
    let s = spec(1, 30.0, 1e-200);
    let coef = template(K, 1, 6.0);
    let truth = latent(&s.warp, &[0.06, 0.03, -0.04], 0.02);
    let sample = curve_sample(&s, &coef, &truth, |_| 0.0, &[]);
    let mut params = s.params.clone();
    params.warp = WarpCovariance::bridge(30.0).with_shift(30.0);
    let p = predict_warp(&s, &params, &sample, &coef, &LatentWarp::identity(&s.warp)).unwrap();
    let got = p.latent.to_vec_padded(&s.warp);
    let want = truth.to_vec_padded(&s.warp);
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-3, "{got:?} vs {want:?}");
    }
    assert!(p.objective <= p.initial_objective);
}

#[test]
fn warp_prediction_respects_constraints() {
    let s = spec(1, 5.0, 0.1);
    let coef = template(K, 1, 4.0);
    let sample = curve_sample(&s, &coef, &LatentWarp::identity(&s.warp), |i| 2.0 * wiggle(i), &[]);
    let p = predict_warp(&s, &s.params, &sample, &coef, &LatentWarp::identity(&s.warp)).unwrap();
    assert!(s.warp.is_feasible(&p.latent));
    assert!(p.objective <= p.initial_objective);
}

fn design_rows(s: &ModelSpec, sample: &FunctionalSample, lat: &LatentWarp) -> DMatrix<f64> {
    let q = sample.q();
    let k = s.basis.len();
    let obs = sample.observed();
    let mut r = DMatrix::zeros(obs.len(), k * q);
    for (row, &i) in obs.iter().enumerate() {
        let t = sample.times()[i / q];
        let b = s.basis.eval(s.warp.eval(lat, t).unwrap().clamp(0.0, 1.0)).unwrap();
        for c in 0..k {
            r[(row, (i % q) * k + c)] = b[c];
        }
    }
    r
}

#[test]
fn gls_reduces_to_least_squares_with_unit_covariance() {
    let s = spec(2, 0.3, 1e-200);
    let coef = template(K, 2, 1.0);
    let (data, lats) = small_data(&s, &coef, 4, true);
    let fe = fit_fixed_effects_gls(&s, &s.params, &data, &lats).unwrap();
    // noise ratios weight the two coordinates: rho = (1, 2)
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    for n in 0..data.len() {
        let smp = data.sample(n);
        let r = design_rows(&s, smp, &lats[n]);
        for (row, &i) in smp.observed().iter().enumerate() {
            let w = 1.0 / (1.0 + (i % 2) as f64).sqrt();
            rows.push(r.row(row) * w);
            ys.push(smp.values()[i] * w);
        }
    }
    let a = DMatrix::from_rows(&rows);
    let y = DVector::from_vec(ys);
    let ols = (a.transpose() * &a).try_inverse().unwrap() * a.transpose() * &y;
    let got = DVector::from_column_slice(fe.coefficients[0].as_slice());
    assert!((&got - &ols).abs().max() < 1e-9 * (1.0 + ols.abs().max()));
    let normal = a.transpose() * (y - &a * &got);
    assert!(normal.abs().max() < 1e-8);
}

#[test]
fn gls_recovers_exact_templates() {
    let s = spec(2, 0.3, 0.6);
    let coef = template(K, 2, 1.0);
    let mut samples = Vec::new();
    let mut lats = Vec::new();
    for i in 0..3 {
        let lat = latent(&s.warp, &[0.02 * i as f64, 0.0, -0.01 * i as f64], 0.01);
        let mut smp = curve_sample(&s, &coef, &lat, |_| 0.0, &[]);
        smp.id = format!("n{i}");
        samples.push(smp);
        lats.push(lat);
    }
    let data = DataSet::with_subject_count(samples, 1).unwrap();
    let fe = fit_fixed_effects_gls(&s, &s.params, &data, &lats).unwrap();
    assert!((&fe.coefficients[0] - &coef).abs().max() < 1e-8);
    assert!(fe.trained[0]);
}

#[test]
fn em_with_degenerate_moments_equals_gls() {
    let s = spec(2, 0.3, 0.6);
    let coef = template(K, 2, 1.0);
    let (data, lats) = small_data(&s, &coef, 4, true);
    let p = s.warp.latent_dim();
    let moments: Vec<_> = lats.iter().map(|l| (DVector::from_vec(l.to_vec_padded(&s.warp)), DMatrix::zeros(p, p))).collect();
    let em = em_update_coefficients(&s, &s.params, &data, &lats, &moments).unwrap();
    let gls = fit_fixed_effects_gls(&s, &s.params, &data, &lats).unwrap();
    assert!((&em.coefficients[0] - &gls.coefficients[0]).abs().max() < 1e-10);
}

#[test]
fn em_steps_do_not_increase_linearized_criterion() {
    let s = spec(2, 0.5, 0.4);
    let coef = template(K, 2, 2.0);
    let (data, lats) = small_data(&s, &coef, 5, true);
    let sigma2 = 0.05;
    let mut coefs = fit_fixed_effects_gls(&s, &s.params, &data, &lats).unwrap().coefficients;
    let mut prev = linearized_criterion(&s, &s.params, sigma2, &data, &lats, &coefs).unwrap();
    for step in 0..10 {
        let moments = all_moments(&s, &s.params, sigma2, &data, &lats, &coefs).unwrap();
        coefs = em_update_coefficients(&s, &s.params, &data, &lats, &moments).unwrap().coefficients;
        let cur = linearized_criterion(&s, &s.params, sigma2, &data, &lats, &coefs).unwrap();
        assert!(cur <= prev + 1e-8 * prev.abs(), "step {step}: {cur} > {prev}");
        prev = cur;
    }
}

#[test]
fn em_moments_are_symmetric() {
    let s = spec(2, 0.5, 0.4);
    let coef = template(K, 2, 2.0);
    let (data, lats) = small_data(&s, &coef, 3, false);
    for (_, cov) in all_moments(&s, &s.params, 0.1, &data, &lats, std::slice::from_ref(&coef)).unwrap() {
        assert_eq!(cov, cov.transpose());
    }
}

fn sim_data(seed: u64, n: usize) -> (ModelSpec, DataSet) {
    let s = spec(1, 0.2, 0.3);
    let sim = SimulationSpec {
        basis: s.basis.clone(),
        warp: s.warp.clone(),
        warp_cov: Some(WarpCovariance::bridge(0.02).with_shift(0.01)),
        amplitude: Some(AmplitudeModel::diagonal(TemporalKernel::Mixture { a: 0.3 }, vec![0.1]).unwrap()),
        noise: NoiseModel::homogeneous(1),
        noise_sd: 0.05,
        templates: vec![template(K, 1, 2.0)],
        samples_per_subject: n,
        grid: grid(),
        seed,
    };
    (s, simulate(&sim).unwrap().data)
}

#[test]
fn variance_estimate_improves_and_is_stationary() {
    let (s, data) = sim_data(3, 8);
    let coef = template(K, 1, 2.0);
    let lats = vec![LatentWarp::identity(&s.warp); data.len()];
    let lins = linearize_all(&s, &data, &lats, &[coef]).unwrap();
    let est = estimate_variance(&s, &s.params, &data, &lins, &BfgsOptions::default()).unwrap();
    assert!(est.profile.value <= est.initial_value);
    // perturbing any free coordinate away from the optimum does not help
    let x = est.params.encode(&s.warp).unwrap();
    let mask = s.free_mask();
    for i in (0..x.len()).filter(|&i| mask[i]) {
        for d in [-0.05, 0.05] {
            let mut y = x.clone();
            y[i] += d;
            let p = est.params.decode(&s.warp, &y).unwrap();
            let v = profile_nll(&s, &p, &data, &lins).unwrap().value;
            assert!(v >= est.profile.value - 1e-6 * est.profile.value.abs(), "coordinate {i}");
        }
    }
}

#[test]
fn single_free_parameter_matches_grid_search() {
    let (mut s, data) = sim_data(5, 6);
    let coef = template(K, 1, 2.0);
    let lats = vec![LatentWarp::identity(&s.warp); data.len()];
    let lins = linearize_all(&s, &data, &lats, &[coef]).unwrap();
    let layout = s.params.layout(&s.warp);
    s.free.fixed = layout.iter().map(|p| p.name.clone()).filter(|n| n != "amplitude.log_scale.1").collect();
    let idx = layout.iter().position(|p| p.name == "amplitude.log_scale.1").unwrap();
    assert_eq!(s.free_mask().iter().filter(|&&f| f).count(), 1);
    let est = estimate_variance(&s, &s.params, &data, &lins, &BfgsOptions::default()).unwrap();
    let x0 = s.params.encode(&s.warp).unwrap();
    let mut best = (f64::INFINITY, 0.0);
    for g in 0..200 {
        let log_scale = -6.0 + 8.0 * g as f64 / 199.0;
        let mut x = x0.clone();
        x[idx] = log_scale;
        let v = profile_nll(&s, &s.params.decode(&s.warp, &x).unwrap(), &data, &lins).unwrap().value;
        if v < best.0 {
            best = (v, log_scale);
        }
    }
    let got = est.params.encode(&s.warp).unwrap();
    assert!(est.profile.value <= best.0 + 1e-6 * best.0.abs(), "{} vs {}", est.profile.value, best.0);
    assert!((got[idx] - best.1).abs() <= 8.0 / 199.0 + 1e-9);
    for (i, (a, b)) in got.iter().zip(&x0).enumerate() {
        if i != idx {
            assert_eq!(a, b);
        }
    }
}

#[test]
fn fit_on_exact_curves_has_no_residual() {
    let s = spec(1, 0.3, 0.5);
    let coef = template(K, 1, 1.0);
    let id = LatentWarp::identity(&s.warp);
    let samples = (0..4)
        .map(|i| {
            let mut smp = curve_sample(&s, &coef, &id, |_| 0.0, &[]);
            smp.id = format!("n{i}");
            smp
        })
        .collect();
    let data = DataSet::with_subject_count(samples, 1).unwrap();
    let fitted = fit(&data, &s, &FitOptions::default()).unwrap();
    assert!(fitted.sigma2 < 1e-10, "{}", fitted.sigma2);
    for l in &fitted.latents {
        assert!(DVector::from_vec(l.to_vec_padded(&s.warp)).norm() < 1e-6);
    }
}

#[test]
fn fit_trace_is_monotone_and_deterministic() {
    let (s, data) = sim_data(11, 10);
    let opts = FitOptions::default();
    let a = fit(&data, &s, &opts).unwrap();
    for w in a.trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-9 * w[0].abs(), "{:?}", a.trace);
    }
    let b = fit(&data, &s, &opts).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.coefficients, b.coefficients);
    assert_eq!(a.sigma2, b.sigma2);
}

#[test]
fn fit_with_em_runs_and_stays_monotone() {
    let (s, data) = sim_data(13, 6);
    let opts = FitOptions { em: true, ..FitOptions::default() };
    let f = fit(&data, &s, &opts).unwrap();
    assert!(!f.trace.is_empty());
    for w in f.trace.windows(2) {
        assert!(w[1] <= w[0] + 1e-9 * w[0].abs());
    }
}

#[test]
fn fit_rejects_inconsistent_inputs() {
    let s = spec(2, 0.3, 0.5);
    let (_, data) = sim_data(1, 2);
    assert!(fit(&data, &s, &FitOptions::default()).is_err());
}
