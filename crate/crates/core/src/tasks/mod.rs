//! Simulation, alignment, classification and cross-validation.

mod align;
mod classify;
mod cv;
mod simulate;

pub use align::{align_sample, mean_cross_sectional_variance};
pub use classify::{centroid_distances, classify_nc, classify_posterior, posterior_scores, Centroids};
pub use cv::{cross_validate, fold_assignment, holdout_accuracy, Classifier, CvReport, NcClassifier, SimmClassifier};
pub use simulate::{eval_template, simulate, SimulatedData, SimulationSpec};
