//! Template-based classification: posterior distance under a fitted model
//! and nearest-centroid baselines.

use nalgebra::DVector;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{DataSet, FunctionalSample};
use crate::error::{invalid, Result};
use crate::inference::{predict_with, Factors, FittedModel};
use crate::linalg::CholFactor;
use crate::warp::LatentWarp;

const RESTARTS: usize = 3;
const RESTART_SEED: u64 = 0x0005_eed0_fa11;

/// Deterministic feasible starting points: identity plus small draws from
/// the (scaled) latent prior. The same points are used for every subject.
fn starting_points(fitted: &FittedModel) -> Result<Vec<LatentWarp>> {
    let model = &fitted.spec.warp;
    let mut starts = vec![LatentWarp::identity(model)];
    let c = fitted.params().warp_matrix(model) * (0.25 * fitted.sigma2);
    let l = crate::linalg::cholesky_jittered(&c, 1e-14, 1e-8)?.0;
    let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
    for _ in 0..RESTARTS {
        let z = DVector::from_iterator(c.nrows(), (0..c.nrows()).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let mut v = l.l() * z;
        for _ in 0..60 {
            let cand = LatentWarp::from_slice(model, v.as_slice());
            if model.is_feasible(&cand) {
                starts.push(cand);
                break;
            }
            v *= 0.5;
        }
    }
    Ok(starts)
}

/// Minimal posterior criterion of `sample` under each subject's template;
/// `None` for subjects without training data.
pub fn posterior_scores(sample: &FunctionalSample, fitted: &FittedModel) -> Result<Vec<Option<f64>>> {
    let spec = &fitted.spec;
    if sample.q() != spec.q() {
        return Err(invalid("sample dimension does not match the model"));
    }
    let f = Factors::for_sample(spec, fitted.params(), sample)?;
    let starts = starting_points(fitted)?;
    score_with(sample, fitted, &f.sigma[0], &f.c_chol, &starts)
}

fn score_with(
    sample: &FunctionalSample,
    fitted: &FittedModel,
    sigma: &CholFactor,
    c_chol: &CholFactor,
    starts: &[LatentWarp],
) -> Result<Vec<Option<f64>>> {
    fitted
        .coefficients
        .iter()
        .zip(&fitted.trained)
        .map(|(coef, &trained)| {
            if !trained {
                return Ok(None);
            }
            let mut best = f64::INFINITY;
            for s in starts {
                let p = predict_with(&fitted.spec, sample, coef, sigma, c_chol, s, 50)?;
                best = best.min(p.objective);
            }
            Ok(Some(best))
        })
        .collect()
}

fn argmin(scores: &[Option<f64>]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, s) in scores.iter().enumerate() {
        if let Some(v) = *s {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((j, v));
            }
        }
    }
    best.map(|(j, _)| j).ok_or_else(|| invalid("no subject has a finite score"))
}

/// Subject whose template gives the smallest posterior criterion, with
/// warps refitted per candidate. Ties go to the lowest index.
pub fn classify_posterior(sample: &FunctionalSample, fitted: &FittedModel) -> Result<usize> {
    argmin(&posterior_scores(sample, fitted)?)
}

/// Linear interpolation of one coordinate of a sample; `None` outside its
/// observed range.
fn interp(sample: &FunctionalSample, coord: usize, t: f64) -> Option<f64> {
    let q = sample.q();
    let pts: Vec<(f64, f64)> =
        sample.times().iter().enumerate().filter(|&(k, _)| sample.values()[k * q + coord].is_finite()).map(|(k, &tk)| (tk, sample.values()[k * q + coord])).collect();
    let first = pts.first()?;
    let last = pts.last()?;
    if t < first.0 || t > last.0 {
        return None;
    }
    let i = pts.partition_point(|p| p.0 <= t).saturating_sub(1).min(pts.len().saturating_sub(2));
    if pts.len() == 1 {
        return Some(first.1);
    }
    let (t0, y0) = pts[i];
    let (t1, y1) = pts[i + 1];
    Some(y0 + (y1 - y0) * (t - t0) / (t1 - t0))
}

/// Training curves grouped by subject; the centroid at a time is the mean of
/// the curves' linear interpolants there.
#[derive(Debug, Clone)]
pub struct Centroids {
    members: Vec<Vec<FunctionalSample>>,
    q: usize,
}

impl Centroids {
    pub fn new(train: &DataSet) -> Self {
        let members = (0..train.n_subjects())
            .map(|j| train.subject_samples(j).into_iter().map(|n| train.sample(n).clone()).collect())
            .collect();
        Self { members, q: train.q() }
    }

    pub fn n_subjects(&self) -> usize {
        self.members.len()
    }

    pub fn is_trained(&self, j: usize) -> bool {
        !self.members[j].is_empty()
    }

    /// Centroid of subject `j`, coordinate `coord`, at time `t`.
    pub fn value(&self, j: usize, coord: usize, t: f64) -> Option<f64> {
        let vals: Vec<f64> = self.members[j].iter().filter_map(|s| interp(s, coord, t)).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Weighted squared distances of `sample` to every trained centroid, using
/// only the entries where all trained centroids are defined.
pub fn centroid_distances(sample: &FunctionalSample, centroids: &Centroids, weights: &[f64]) -> Result<Vec<Option<f64>>> {
    let q = sample.q();
    if q != centroids.q || weights.len() != q {
        return Err(invalid("dimension mismatch between sample, centroids and weights"));
    }
    let trained: Vec<usize> = (0..centroids.n_subjects()).filter(|&j| centroids.is_trained(j)).collect();
    let mut dist = vec![0.0; centroids.n_subjects()];
    let mut used = 0usize;
    for &i in sample.observed() {
        let (k, c) = (i / q, i % q);
        let t = sample.times()[k];
        let cent: Option<Vec<f64>> = trained.iter().map(|&j| centroids.value(j, c, t)).collect();
        let Some(cent) = cent else { continue };
        let y = sample.values()[i];
        for (&j, cv) in trained.iter().zip(cent) {
            dist[j] += weights[c] * (y - cv).powi(2);
        }
        used += 1;
    }
    if used == 0 {
        return Err(invalid(format!("sample {} does not overlap the centroids", sample.id)));
    }
    Ok((0..centroids.n_subjects()).map(|j| centroids.is_trained(j).then_some(dist[j])).collect())
}

/// Nearest (weighted) centroid; unit weights give the unweighted rule.
pub fn classify_nc(sample: &FunctionalSample, centroids: &Centroids, weights: &[f64]) -> Result<usize> {
    argmin(&centroid_distances(sample, centroids, weights)?)
}
