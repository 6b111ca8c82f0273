//! WebAssembly bindings for the browser demo in `www/`.

pub mod demo;

use wasm_bindgen::prelude::*;

fn js(e: simm::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Warp functions of `count` random draws on `grid_points` points, concatenated.
#[wasm_bindgen(js_name = warpDraws)]
pub fn warp_draws(seed: u32, count: usize, tau: f64, anchors: usize, bridge: bool, grid_points: usize) -> Result<Vec<f64>, JsError> {
    demo::warp_draws(seed as u64, count, tau, anchors, bridge, grid_points).map_err(js)
}

/// Matérn correlation at the given lags.
#[wasm_bindgen(js_name = maternCurve)]
pub fn matern_curve(alpha: f64, kappa: f64, lags: Vec<f64>) -> Result<Vec<f64>, JsError> {
    demo::matern_curve(alpha, kappa, &lags).map_err(js)
}

/// Simulated curves with a model fitted on demand.
#[wasm_bindgen]
pub struct Session(demo::Session);

#[wasm_bindgen]
impl Session {
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, samples: usize, warp_tau: f64, amp_scale: f64, kappa: f64, noise_sd: f64) -> Result<Session, JsError> {
        demo::Session::simulate(seed as u64, samples, warp_tau, amp_scale, kappa, noise_sd).map(Session).map_err(js)
    }

    pub fn grid(&self) -> Vec<f64> {
        self.0.grid().to_vec()
    }

    #[wasm_bindgen(getter)]
    pub fn count(&self) -> usize {
        self.0.len()
    }

    pub fn curve(&self, n: usize) -> Vec<f64> {
        self.0.curve(n)
    }

    #[wasm_bindgen(js_name = trueWarp)]
    pub fn true_warp(&self, n: usize) -> Result<Vec<f64>, JsError> {
        self.0.true_warp(n).map_err(js)
    }

    pub fn fit(&mut self, em: bool, max_outer: usize) -> Result<f64, JsError> {
        self.0.fit(em, max_outer).map_err(js)
    }

    #[wasm_bindgen(js_name = fittedWarp)]
    pub fn fitted_warp(&self, n: usize) -> Result<Vec<f64>, JsError> {
        self.0.fitted_warp(n).map_err(js)
    }

    pub fn aligned(&self, n: usize) -> Result<Vec<f64>, JsError> {
        self.0.aligned(n).map_err(js)
    }

    pub fn template(&self) -> Result<Vec<f64>, JsError> {
        self.0.template().map_err(js)
    }

    /// `[before, after]` mean cross-sectional variance.
    #[wasm_bindgen(js_name = varianceReduction)]
    pub fn variance_reduction(&self) -> Result<Vec<f64>, JsError> {
        self.0.variance_reduction().map(|(a, b)| vec![a, b]).map_err(js)
    }

    pub fn parameters(&self) -> Result<String, JsError> {
        self.0.parameters().map_err(js)
    }
}
