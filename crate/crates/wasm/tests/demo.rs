use simm_wasm::demo::{matern_curve, unit_grid, warp_draws, Session};

#[test]
fn warp_draws_are_monotone_and_reproducible() {
    for bridge in [true, false] {
        let a = warp_draws(3, 20, 0.15, 3, bridge, 50).unwrap();
        assert_eq!(a.len(), 20 * 50);
        assert_eq!(a, warp_draws(3, 20, 0.15, 3, bridge, 50).unwrap());
        for v in a.chunks(50) {
            assert!(v.windows(2).all(|w| w[1] >= w[0]));
            assert_eq!(v[0], 0.0);
            if bridge {
                assert_eq!(v[49], 1.0);
            }
        }
    }
}

#[test]
fn matern_half_is_exponential() {
    let lags = unit_grid(11);
    let c = matern_curve(0.5, 0.3, &lags).unwrap();
    for (d, v) in lags.iter().zip(&c) {
        assert!((v - (-d / 0.3f64).exp()).abs() < 1e-12);
    }
    assert!(matern_curve(-1.0, 0.3, &lags).is_err());
}

#[test]
fn session_fits_and_aligns() {
    let mut s = Session::simulate(5, 12, 0.15, 0.05, 0.2, 0.02).unwrap();
    assert_eq!(s.len(), 12);
    assert!(s.aligned(0).is_err());
    let sigma2 = s.fit(false, 5).unwrap();
    assert!(sigma2 > 0.0 && sigma2.is_finite());
    assert_eq!(s.template().unwrap().len(), s.grid().len());
    let w = s.fitted_warp(0).unwrap();
    assert!(w.windows(2).all(|p| p[1] >= p[0]));
    let (before, after) = s.variance_reduction().unwrap();
    assert!(after < before, "{before} -> {after}");
    assert!(s.parameters().unwrap().contains("warp tau"));
}
