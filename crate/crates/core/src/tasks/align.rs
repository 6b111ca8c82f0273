//! Registration of observed curves onto a common time axis.

use crate::data::FunctionalSample;
use crate::error::{invalid, Result};
use crate::warp::{LatentWarp, WarpModel};

/// Values of `sample` moved to warped time: coordinate `j` at grid point
/// `u` is the linear interpolant of `(v(t_k), y_kj)` at `u`. Returns a
/// time-major `grid.len() x q` vector with NaN outside the warped range.
pub fn align_sample(model: &WarpModel, sample: &FunctionalSample, latent: &LatentWarp, grid: &[f64]) -> Result<Vec<f64>> {
    let curve = model.curve(latent)?;
    let v: Vec<f64> = sample.times().iter().map(|&t| curve.eval(t)).collect();
    if v.windows(2).any(|w| w[0] >= w[1] || w[0].is_nan() || w[1].is_nan()) {
        return Err(invalid(format!("warp of sample {} is not strictly increasing on its times", sample.id)));
    }
    let q = sample.q();
    let mut out = vec![f64::NAN; grid.len() * q];
    for j in 0..q {
        let pts: Vec<(f64, f64)> = (0..sample.m()).filter_map(|k| sample.value(k, j).map(|y| (v[k], y))).collect();
        for (g, &u) in grid.iter().enumerate() {
            out[g * q + j] = interpolate(&pts, u);
        }
    }
    Ok(out)
}

fn interpolate(pts: &[(f64, f64)], u: f64) -> f64 {
    match pts {
        [] => f64::NAN,
        [(x, y)] => {
            if u == *x {
                *y
            } else {
                f64::NAN
            }
        }
        _ => {
            if u < pts[0].0 || u > pts[pts.len() - 1].0 {
                return f64::NAN;
            }
            let i = pts.partition_point(|p| p.0 <= u).clamp(1, pts.len() - 1);
            let (x0, y0) = pts[i - 1];
            let (x1, y1) = pts[i];
            y0 + (y1 - y0) * (u - x0) / (x1 - x0)
        }
    }
}

/// Mean over grid entries of the cross-sectional variance (divisor `n - 1`)
/// of curves stored as equal-length vectors; entries with fewer than two
/// finite values are skipped.
pub fn mean_cross_sectional_variance(curves: &[Vec<f64>]) -> f64 {
    let Some(len) = curves.first().map(Vec::len) else { return f64::NAN };
    let mut total = 0.0;
    let mut used = 0usize;
    for e in 0..len {
        let vals: Vec<f64> = curves.iter().map(|c| c[e]).filter(|x| x.is_finite()).collect();
        if vals.len() < 2 {
            continue;
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        total += vals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        used += 1;
    }
    if used == 0 {
        f64::NAN
    } else {
        total / used as f64
    }
}
