//! Human-readable parameter report and plot-ready covariance exports.

use nalgebra::{DMatrix, SymmetricEigen};
use simm::covariance::{AmplitudeVariant, TemporalKernel};
use simm::{FittedModel, WarpCovFamily};

/// Named values of the fitted model in data units.
pub fn parameter_rows(fitted: &FittedModel) -> Vec<(String, f64)> {
    let abs = fitted.absolute_params();
    let mut rows = vec![("sigma2".to_string(), fitted.sigma2), ("noise_sd".to_string(), fitted.sigma())];
    match &abs.warp.family {
        WarpCovFamily::BrownianBridge { tau } | WarpCovFamily::BrownianMotion { tau } => rows.push(("warp.tau".into(), *tau)),
        WarpCovFamily::Unstructured(c) => {
            for i in 0..c.nrows() {
                for j in 0..=i {
                    rows.push((format!("warp.C{}{}", i + 1, j + 1), c[(i, j)]));
                }
            }
        }
    }
    if let Some(sd) = abs.warp.shift_sd {
        rows.push(("warp.shift_sd".into(), sd));
    }
    kernel_rows("amplitude.kernel", &abs.amplitude.kernel, &mut rows);
    match &abs.amplitude.variant {
        AmplitudeVariant::Diagonal { scales } => {
            for (j, s) in scales.iter().enumerate() {
                rows.push((format!("amplitude.scale.{}", j + 1), *s));
            }
        }
        AmplitudeVariant::Dynamic(anchors) => {
            for (k, (t, a)) in anchors.times().iter().zip(anchors.matrices()).enumerate() {
                rows.push((format!("amplitude.anchor{}.t", k + 1), *t));
                for i in 0..a.nrows() {
                    for j in 0..=i {
                        rows.push((format!("amplitude.anchor{}.A{}{}", k + 1, i + 1, j + 1), a[(i, j)]));
                    }
                }
            }
        }
    }
    for (j, r) in abs.noise.rho().iter().enumerate() {
        rows.push((format!("noise.rho.{}", j + 1), *r));
    }
    if let Some(v) = fitted.trace.last() {
        rows.push(("criterion".into(), *v));
    }
    rows.push(("outer_iterations".into(), fitted.outer_iterations as f64));
    rows.push(("converged".into(), if fitted.converged { 1.0 } else { 0.0 }));
    rows
}

fn kernel_rows(prefix: &str, k: &TemporalKernel, rows: &mut Vec<(String, f64)>) {
    match k {
        TemporalKernel::BrownianBridge { tau } | TemporalKernel::BrownianMotion { tau } => rows.push((format!("{prefix}.tau"), *tau)),
        TemporalKernel::Matern { alpha, kappa } => {
            rows.push((format!("{prefix}.alpha"), *alpha));
            rows.push((format!("{prefix}.kappa"), *kappa));
        }
        TemporalKernel::Mixture { a } => rows.push((format!("{prefix}.a"), *a)),
        TemporalKernel::Product(parts) => {
            for (i, p) in parts.iter().enumerate() {
                kernel_rows(&format!("{prefix}.{}", i + 1), p, rows);
            }
        }
    }
}

/// Marginal `q x q` covariance of the fitted model at unit time `u`, in data
/// units, optionally including measurement noise.
pub fn marginal_cov(fitted: &FittedModel, u: f64, with_noise: bool) -> DMatrix<f64> {
    let mut s = fitted.spec.params.amplitude.cross_cov(u, u) * fitted.sigma2;
    if with_noise {
        for (j, r) in fitted.spec.params.noise.rho().iter().enumerate() {
            s[(j, j)] += fitted.sigma2 * r;
        }
    }
    s
}

/// 95% quantile of the chi-square distribution with `dof` degrees of freedom.
pub fn chi2_quantile_95(dof: usize) -> f64 {
    2.0 * puruspe::invgammp(0.95, dof as f64 / 2.0)
}

/// Eigen-axes of a covariance, largest first, each eigenvector signed so that
/// its largest-magnitude entry is positive.
pub fn axes(cov: &DMatrix<f64>) -> Vec<(f64, Vec<f64>)> {
    let eig = SymmetricEigen::new(cov.clone());
    let mut out: Vec<(f64, Vec<f64>)> = (0..cov.nrows())
        .map(|i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let lead = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if lead < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            (eig.eigenvalues[i], v)
        })
        .collect();
    out.sort_by(|a, b| b.0.total_cmp(&a.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi2_quantiles() {
        // reference values of the chi-square 95% quantile
        assert!((chi2_quantile_95(1) - 3.841458820694124).abs() < 1e-9);
        assert!((chi2_quantile_95(2) - 5.991464547107979).abs() < 1e-9);
        assert!((chi2_quantile_95(3) - 7.814727903251178).abs() < 1e-9);
    }

    #[test]
    fn axes_reconstruct_the_covariance() {
        let c = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, -0.1, 0.3, 1.0, 0.2, -0.1, 0.2, 0.5]);
        let ax = axes(&c);
        assert!(ax.windows(2).all(|w| w[0].0 >= w[1].0));
        let mut r = DMatrix::zeros(3, 3);
        for (l, v) in &ax {
            let v = nalgebra::DVector::from_column_slice(v);
            r += &v * v.transpose() * *l;
        }
        assert!((r - c).abs().max() < 1e-10);
    }
}
