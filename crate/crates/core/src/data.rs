//! Observed functional samples and data sets.

use std::collections::HashMap;

use nalgebra::DVector;

use crate::error::{invalid, Result};

/// One observed multivariate curve on a strictly increasing time grid.
///
/// Values are stored time-major (`q` coordinates per time point); missing
/// coordinates are `NaN` and excluded through the observation mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalSample {
    pub id: String,
    /// Index into the data set's subject list.
    pub subject: usize,
    times: Vec<f64>,
    values: Vec<f64>,
    q: usize,
    observed: Vec<usize>,
}

impl FunctionalSample {
    pub fn new(id: impl Into<String>, subject: usize, times: Vec<f64>, q: usize, values: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if q == 0 || times.is_empty() || values.len() != times.len() * q {
            return Err(invalid(format!("sample {id}: need {} values for {} times and q = {q}", times.len() * q, times.len())));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid(format!("sample {id}: times must be finite and strictly increasing")));
        }
        if values.iter().any(|v| v.is_infinite()) {
            return Err(invalid(format!("sample {id}: infinite value")));
        }
        let observed: Vec<usize> = (0..values.len()).filter(|&i| !values[i].is_nan()).collect();
        if observed.is_empty() {
            return Err(invalid(format!("sample {id}: no observed values")));
        }
        Ok(Self { id, subject, times, values, q, observed })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn m(&self) -> usize {
        self.times.len()
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Time-major values with `NaN` for missing entries.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, k: usize, j: usize) -> Option<f64> {
        let v = self.values[k * self.q + j];
        (!v.is_nan()).then_some(v)
    }

    /// Stacked indices `k * q + j` of the observed entries.
    pub fn observed(&self) -> &[usize] {
        &self.observed
    }

    pub fn n_obs(&self) -> usize {
        self.observed.len()
    }

    pub fn is_complete(&self) -> bool {
        self.observed.len() == self.values.len()
    }

    /// Observed values as a vector.
    pub fn y_obs(&self) -> DVector<f64> {
        DVector::from_iterator(self.observed.len(), self.observed.iter().map(|&i| self.values[i]))
    }

    fn pattern_key(&self) -> (Vec<u64>, Vec<usize>) {
        (self.times.iter().map(|t| t.to_bits()).collect(), self.observed.clone())
    }
}

/// Samples with a subject map; samples sharing times and mask share a
/// pattern, so covariance factorizations can be reused across them.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    samples: Vec<FunctionalSample>,
    subjects: Vec<String>,
    patterns: Vec<usize>,
    pattern_reps: Vec<usize>,
}

impl DataSet {
    pub fn new(samples: Vec<FunctionalSample>, subjects: Vec<String>) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("data set has no samples"));
        }
        let q = samples[0].q();
        let mut keys: HashMap<(Vec<u64>, Vec<usize>), usize> = HashMap::new();
        let mut patterns = Vec::with_capacity(samples.len());
        let mut pattern_reps = Vec::new();
        for (i, s) in samples.iter().enumerate() {
            if s.q() != q {
                return Err(invalid(format!("sample {} has q = {}, expected {q}", s.id, s.q())));
            }
            if s.subject >= subjects.len() {
                return Err(invalid(format!("sample {} refers to unknown subject {}", s.id, s.subject)));
            }
            let next = pattern_reps.len();
            let p = *keys.entry(s.pattern_key()).or_insert(next);
            if p == next {
                pattern_reps.push(i);
            }
            patterns.push(p);
        }
        Ok(Self { samples, subjects, patterns, pattern_reps })
    }

    /// Data set whose subjects are named `0..n_subjects`.
    pub fn with_subject_count(samples: Vec<FunctionalSample>, n_subjects: usize) -> Result<Self> {
        Self::new(samples, (0..n_subjects).map(|j| j.to_string()).collect())
    }

    pub fn samples(&self) -> &[FunctionalSample] {
        &self.samples
    }

    pub fn sample(&self, n: usize) -> &FunctionalSample {
        &self.samples[n]
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn q(&self) -> usize {
        self.samples[0].q()
    }

    pub fn subjects(&self) -> &[String] {
        &self.subjects
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    /// Indices of the samples of subject `j`, in data-set order.
    pub fn subject_samples(&self, j: usize) -> Vec<usize> {
        (0..self.samples.len()).filter(|&n| self.samples[n].subject == j).collect()
    }

    /// Total number of observed scalars.
    pub fn n_obs(&self) -> usize {
        self.samples.iter().map(|s| s.n_obs()).sum()
    }

    pub fn pattern(&self, n: usize) -> usize {
        self.patterns[n]
    }

    pub fn n_patterns(&self) -> usize {
        self.pattern_reps.len()
    }

    /// A sample carrying the given pattern.
    pub fn pattern_representative(&self, p: usize) -> &FunctionalSample {
        &self.samples[self.pattern_reps[p]]
    }

    /// A new data set restricted to the given sample indices (subjects kept).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.samples[i].clone()).collect(), self.subjects.clone())
    }

    /// Rough noise standard deviation from second differences of consecutive
    /// observed values (exact for white noise around locally linear curves
    /// on equidistant grids). Useful as a starting value.
    pub fn noise_sd_estimate(&self) -> f64 {
        let mut sum = 0.0;
        let mut count = 0usize;
        for s in &self.samples {
            let q = s.q();
            for j in 0..q {
                let ys: Vec<f64> = (0..s.m()).filter_map(|k| s.value(k, j)).collect();
                for w in ys.windows(3) {
                    sum += (w[0] - 2.0 * w[1] + w[2]).powi(2) / 6.0;
                    count += 1;
                }
            }
        }
        if count == 0 {
            return 1.0;
        }
        (sum / count as f64).sqrt().max(1e-12)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_excludes_missing_entries() {
        let s = FunctionalSample::new("a", 0, vec![0.0, 0.5, 1.0], 2, vec![1.0, 2.0, 3.0, f64::NAN, 5.0, 6.0]).unwrap();
        assert_eq!(s.observed(), &[0, 1, 2, 4, 5]);
        assert_eq!(s.y_obs().as_slice(), &[1.0, 2.0, 3.0, 5.0, 6.0]);
        assert_eq!(s.value(1, 1), None);
        assert!(!s.is_complete());
    }

    #[test]
    fn invalid_samples_rejected() {
        assert!(FunctionalSample::new("a", 0, vec![0.0, 0.0], 1, vec![1.0, 2.0]).is_err());
        assert!(FunctionalSample::new("a", 0, vec![0.0, 1.0], 1, vec![1.0]).is_err());
        assert!(FunctionalSample::new("a", 0, vec![0.0], 1, vec![f64::NAN]).is_err());
        assert!(FunctionalSample::new("a", 0, vec![0.0], 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn patterns_group_identical_grids() {
        let g = vec![0.0, 0.5, 1.0];
        let s = |id: &str, subj, times: Vec<f64>, v: Vec<f64>| FunctionalSample::new(id, subj, times, 1, v).unwrap();
        let ds = DataSet::with_subject_count(
            vec![
                s("a", 0, g.clone(), vec![1.0, 2.0, 3.0]),
                s("b", 1, g.clone(), vec![1.0, 2.0, 4.0]),
                s("c", 1, g.clone(), vec![1.0, f64::NAN, 4.0]),
                s("d", 0, vec![0.0, 1.0], vec![1.0, 2.0]),
            ],
            2,
        )
        .unwrap();
        assert_eq!(ds.n_patterns(), 3);
        assert_eq!(ds.pattern(0), ds.pattern(1));
        assert_ne!(ds.pattern(1), ds.pattern(2));
        assert_eq!(ds.subject_samples(1), vec![1, 2]);
        assert_eq!(ds.n_obs(), 10);
        assert!(DataSet::with_subject_count(vec![s("x", 3, g, vec![0.0; 3])], 2).is_err());
    }
}
