//! Chronological k-fold cross-validation.

use super::classify::{classify_nc, classify_posterior, Centroids};
use crate::data::{DataSet, FunctionalSample};
use crate::error::{invalid, Result};
use crate::inference::{fit, FitOptions, FittedModel};
use crate::model::ModelSpec;
use crate::par::par_map;

/// A trainable classifier of samples into subjects.
pub trait Classifier: Sync {
    type Model: Sync;
    fn train(&self, data: &DataSet) -> Result<Self::Model>;
    fn predict(&self, model: &Self::Model, sample: &FunctionalSample) -> Result<usize>;
}

/// Posterior-distance classifier built on a model fit.
#[derive(Debug, Clone)]
pub struct SimmClassifier {
    pub spec: ModelSpec,
    pub options: FitOptions,
}

impl Classifier for SimmClassifier {
    type Model = FittedModel;

    fn train(&self, data: &DataSet) -> Result<FittedModel> {
        // subjects without training samples keep zero templates and are skipped
        let present: Vec<usize> = (0..data.n_subjects()).filter(|&j| !data.subject_samples(j).is_empty()).collect();
        if present.len() == data.n_subjects() {
            return fit(data, &self.spec, &self.options);
        }
        let remap: Vec<Option<usize>> = (0..data.n_subjects()).map(|j| present.iter().position(|&p| p == j)).collect();
        let samples = data
            .samples()
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.subject = remap[s.subject].expect("sample of a present subject");
                s
            })
            .collect();
        let names = present.iter().map(|&j| data.subjects()[j].clone()).collect();
        let reduced = fit(&DataSet::new(samples, names)?, &self.spec, &self.options)?;
        let mut full = reduced.clone();
        full.coefficients = (0..data.n_subjects())
            .map(|j| match remap[j] {
                Some(r) => reduced.coefficients[r].clone(),
                None => nalgebra::DMatrix::zeros(self.spec.basis.len(), data.q()),
            })
            .collect();
        full.trained = remap.iter().map(Option::is_some).collect();
        Ok(full)
    }

    fn predict(&self, model: &FittedModel, sample: &FunctionalSample) -> Result<usize> {
        classify_posterior(sample, model)
    }
}

/// Nearest-centroid classifier with per-coordinate weights.
#[derive(Debug, Clone)]
pub struct NcClassifier {
    pub weights: Vec<f64>,
}

impl Classifier for NcClassifier {
    type Model = Centroids;

    fn train(&self, data: &DataSet) -> Result<Centroids> {
        Ok(Centroids::new(data))
    }

    fn predict(&self, model: &Centroids, sample: &FunctionalSample) -> Result<usize> {
        classify_nc(sample, model, &self.weights)
    }
}

/// Fold of every sample: repetition `i` of a subject with `r` repetitions
/// (in data-set order) goes to fold `floor(i k / r)`.
pub fn fold_assignment(data: &DataSet, k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(invalid("fold count must be positive"));
    }
    let mut folds = vec![0; data.len()];
    for j in 0..data.n_subjects() {
        let members = data.subject_samples(j);
        let r = members.len();
        if r == 0 {
            continue;
        }
        if r < k && data.n_subjects() > 1 {
            return Err(invalid(format!("subject {} has {r} repetitions, fewer than {k} folds", data.subjects()[j])));
        }
        for (i, &n) in members.iter().enumerate() {
            folds[n] = (i * k / r).min(k - 1);
        }
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    /// Accuracy of each fold (correct / tested).
    pub fold_accuracy: Vec<f64>,
    /// Mean of the fold accuracies.
    pub mean_accuracy: f64,
    /// Predicted subject of every sample, from the fold where it was held out.
    pub predictions: Vec<usize>,
    pub correct: usize,
    pub total: usize,
    pub warnings: Vec<String>,
}

/// Train on `k - 1` folds, classify the held-out fold, for every fold.
pub fn cross_validate<C: Classifier>(data: &DataSet, k: usize, classifier: &C) -> Result<CvReport> {
    let folds = fold_assignment(data, k)?;
    let mut predictions = vec![usize::MAX; data.len()];
    let mut fold_accuracy = Vec::with_capacity(k);
    let mut warnings = Vec::new();
    let mut total_correct = 0;
    for f in 0..k {
        let test: Vec<usize> = (0..data.len()).filter(|&n| folds[n] == f).collect();
        let train: Vec<usize> = (0..data.len()).filter(|&n| folds[n] != f).collect();
        if test.is_empty() {
            continue;
        }
        if train.is_empty() {
            return Err(invalid(format!("fold {f} leaves no training data")));
        }
        let train_set = data.subset(&train)?;
        for j in 0..data.n_subjects() {
            if train_set.subject_samples(j).is_empty() && test.iter().any(|&n| data.sample(n).subject == j) {
                warnings.push(format!("fold {f}: subject {} absent from training; its test samples count as errors", data.subjects()[j]));
            }
        }
        let model = classifier.train(&train_set)?;
        let preds = par_map(test.len(), |i| classifier.predict(&model, data.sample(test[i])));
        let mut correct = 0;
        for (&n, p) in test.iter().zip(preds) {
            let p = p?;
            predictions[n] = p;
            if p == data.sample(n).subject && !train_set.subject_samples(p).is_empty() {
                correct += 1;
            }
        }
        total_correct += correct;
        fold_accuracy.push(correct as f64 / test.len() as f64);
    }
    let mean_accuracy = fold_accuracy.iter().sum::<f64>() / fold_accuracy.len() as f64;
    Ok(CvReport { fold_accuracy, mean_accuracy, predictions, correct: total_correct, total: data.len(), warnings })
}

/// Accuracy of a classifier trained on `train` and evaluated on `test`.
pub fn holdout_accuracy<C: Classifier>(train: &DataSet, test: &DataSet, classifier: &C) -> Result<(f64, Vec<usize>)> {
    let model = classifier.train(train)?;
    let preds = par_map(test.len(), |i| classifier.predict(&model, test.sample(i))).into_iter().collect::<Result<Vec<_>>>()?;
    let correct = preds.iter().zip(test.samples()).filter(|(p, s)| **p == s.subject).count();
    Ok((correct as f64 / test.len() as f64, preds))
}
