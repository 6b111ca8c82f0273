//! Fitted-model file (`simm-fit/1`, JSON).

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use simm::{DataSet, FittedModel, LatentWarp};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const SCHEMA: &str = "simm-fit/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleWarp {
    pub sample_id: String,
    pub subject_id: String,
    pub w: Vec<f64>,
    pub shift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema: String,
    pub config: RunConfig,
    pub q: usize,
    pub subjects: Vec<String>,
    pub trained: Vec<bool>,
    pub sigma2: f64,
    /// Encoded variance parameters relative to `sigma2`.
    pub parameters: Vec<NamedValue>,
    /// Template coefficients per subject, one row of `q` values per basis function.
    pub coefficients: Vec<Vec<Vec<f64>>>,
    pub samples: Vec<SampleWarp>,
    /// Original time range shared by all training samples, if any.
    pub time_range: Option<[f64; 2]>,
    pub trace: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl ModelFile {
    pub fn from_fit(
        config: &RunConfig,
        fitted: &FittedModel,
        data: &DataSet,
        time_range: Option<(f64, f64)>,
    ) -> CliResult<Self> {
        let spec = &fitted.spec;
        let encoded = spec.params.encode(&spec.warp)?;
        let names = spec.params.layout(&spec.warp);
        Ok(Self {
            schema: SCHEMA.into(),
            config: config.clone(),
            q: spec.q(),
            subjects: data.subjects().to_vec(),
            trained: fitted.trained.clone(),
            sigma2: fitted.sigma2,
            parameters: names.into_iter().zip(encoded).map(|(p, value)| NamedValue { name: p.name, value }).collect(),
            coefficients: fitted
                .coefficients
                .iter()
                .map(|c| (0..c.nrows()).map(|k| c.row(k).iter().copied().collect()).collect())
                .collect(),
            samples: data
                .samples()
                .iter()
                .zip(&fitted.latents)
                .map(|(s, l)| SampleWarp {
                    sample_id: s.id.clone(),
                    subject_id: data.subjects()[s.subject].clone(),
                    w: l.w.clone(),
                    shift: l.shift,
                })
                .collect(),
            time_range: time_range.map(|(a, b)| [a, b]),
            trace: fitted.trace.clone(),
            outer_iterations: fitted.outer_iterations,
            converged: fitted.converged,
            warnings: fitted.warnings.clone(),
        })
    }

    /// Rebuild the fitted model.
    pub fn to_fitted(&self) -> CliResult<FittedModel> {
        if self.schema != SCHEMA {
            return Err(CliError::data(format!("unsupported model schema {:?}, expected {SCHEMA}", self.schema)));
        }
        let mut spec = self.config.spec_with_scales(&vec![1.0; self.q], 1.0)?;
        let layout = spec.params.layout(&spec.warp);
        if layout.len() != self.parameters.len() || layout.iter().zip(&self.parameters).any(|(a, b)| a.name != b.name) {
            return Err(CliError::data("model parameters do not match its configuration"));
        }
        let encoded: Vec<f64> = self.parameters.iter().map(|p| p.value).collect();
        spec.params = spec.params.decode(&spec.warp, &encoded)?;
        let k = spec.basis.len();
        let mut coefficients = Vec::with_capacity(self.coefficients.len());
        for rows in &self.coefficients {
            if rows.len() != k || rows.iter().any(|r| r.len() != self.q) {
                return Err(CliError::data(format!("template coefficients must be {k}x{}", self.q)));
            }
            coefficients.push(DMatrix::from_fn(k, self.q, |i, j| rows[i][j]));
        }
        if coefficients.len() != self.subjects.len() || self.trained.len() != self.subjects.len() {
            return Err(CliError::data("one template per subject required"));
        }
        let latents = self.samples.iter().map(|s| LatentWarp { w: s.w.clone(), shift: s.shift }).collect();
        Ok(FittedModel {
            spec,
            coefficients,
            trained: self.trained.clone(),
            sigma2: self.sigma2,
            latents,
            trace: self.trace.clone(),
            outer_iterations: self.outer_iterations,
            converged: self.converged,
            warnings: self.warnings.clone(),
        })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| CliError::data(e.to_string()))?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
    }
}
