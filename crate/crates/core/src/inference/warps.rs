//! MAP prediction of latent warps under the monotonicity constraints.

use nalgebra::{DMatrix, DVector};

use super::design::{Factors, WarpedDesign};
use super::likelihood::check_coef;
use crate::data::{DataSet, FunctionalSample};
use crate::error::{invalid, Result};
use crate::linalg::CholFactor;
use crate::model::{ModelSpec, VarianceParams};
use crate::optim::solve_qp;
use crate::par::par_map;
use crate::warp::LatentWarp;

/// Result of a warp prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpPrediction {
    pub latent: LatentWarp,
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    /// False when the iteration limit was reached first.
    pub converged: bool,
}

struct Point {
    w: DVector<f64>,
    value: f64,
    rt: DVector<f64>,
    zt: DMatrix<f64>,
}

fn evaluate(
    spec: &ModelSpec,
    sample: &FunctionalSample,
    coef: &DMatrix<f64>,
    sigma: &CholFactor,
    c_chol: &CholFactor,
    w: DVector<f64>,
) -> Result<Point> {
    let latent = LatentWarp::from_slice(&spec.warp, w.as_slice());
    let design = WarpedDesign::new(spec, sample, &latent)?;
    let obs = sample.observed();
    let rt = sigma.whiten(&(design.gamma(coef, obs) - sample.y_obs()));
    let zt = sigma.whiten_mat(&design.jacobian(coef, obs));
    let value = rt.norm_squared() + c_chol.whiten(&w).norm_squared();
    Ok(Point { w, value, rt, zt })
}

/// Gauss-Newton steps, each solving the constrained quadratic model of the
/// posterior criterion, with a backtracking line search.
pub(crate) fn predict_with(
    spec: &ModelSpec,
    sample: &FunctionalSample,
    coef: &DMatrix<f64>,
    sigma: &CholFactor,
    c_chol: &CholFactor,
    init: &LatentWarp,
    max_iter: usize,
) -> Result<WarpPrediction> {
    if !spec.warp.is_feasible(init) {
        return Err(invalid("initial warp violates the monotonicity constraint"));
    }
    let (a, b) = spec.warp.constraints();
    let c_inv = c_chol.inverse();
    let mut cur = evaluate(spec, sample, coef, sigma, c_chol, DVector::from_vec(init.to_vec_padded(&spec.warp)))?;
    let initial = cur.value;
    let p = cur.w.len();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let h = cur.zt.transpose() * &cur.zt + &c_inv;
        let h = (&h + h.transpose()) * 0.5;
        let g = cur.zt.transpose() * &cur.rt + &c_inv * &cur.w;
        let lower = &b - &a * &cur.w;
        let step = solve_qp(&h, &g, &a, &lower.map(|x| x.min(0.0)), &DVector::zeros(p))?.x;
        let slope = 2.0 * g.dot(&step);
        if slope > -1e-14 * (1.0 + cur.value) {
            converged = true;
            break;
        }
        let mut alpha = 1.0;
        let mut next = None;
        for _ in 0..30 {
            let trial = evaluate(spec, sample, coef, sigma, c_chol, &cur.w + &step * alpha)?;
            if trial.value <= cur.value + 1e-4 * alpha * slope {
                next = Some(trial);
                break;
            }
            alpha *= 0.5;
        }
        let Some(next) = next else {
            converged = true;
            break;
        };
        let decrease = cur.value - next.value;
        cur = next;
        if decrease <= 1e-12 * (1.0 + cur.value) {
            converged = true;
            break;
        }
    }
    Ok(WarpPrediction {
        latent: LatentWarp::from_slice(&spec.warp, cur.w.as_slice()),
        objective: cur.value,
        initial_objective: initial,
        iterations,
        converged,
    })
}

/// Most likely latent warp of `sample` given the template coefficients and
/// variance parameters, starting from the feasible `init`.
pub fn predict_warp(
    spec: &ModelSpec,
    params: &VarianceParams,
    sample: &FunctionalSample,
    coef: &DMatrix<f64>,
    init: &LatentWarp,
) -> Result<WarpPrediction> {
    check_coef(spec, sample, coef)?;
    let f = Factors::for_sample(spec, params, sample)?;
    predict_with(spec, sample, coef, &f.sigma[0], &f.c_chol, init, 50)
}

pub(crate) fn predict_all(
    spec: &ModelSpec,
    data: &DataSet,
    coefs: &[DMatrix<f64>],
    factors: &Factors,
    inits: &[LatentWarp],
    max_iter: usize,
) -> Result<Vec<WarpPrediction>> {
    par_map(data.len(), |n| {
        let s = data.sample(n);
        predict_with(spec, s, &coefs[s.subject], &factors.sigma[data.pattern(n)], &factors.c_chol, &inits[n], max_iter)
    })
    .into_iter()
    .collect()
}
