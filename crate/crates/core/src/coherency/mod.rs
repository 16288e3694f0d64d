//! Facet-set coherency: weak labels, features, the logistic scorer and its
//! evaluation.
//!
//! The scorer maps a facet set to `s` in [0, 1]; a set is coherent iff
//! `s > 0.5`. Any [`CoherencyScorer`] can stand behind that contract: the
//! in-crate [`LocalScorer`] (engineered features + logistic regression) or a
//! remote model through [`crate::remote::ExternalScorer`].

mod evaluate;
mod features;
mod labels;
mod logistic;
mod model;
mod split;
pub mod synthetic;
mod weak;

use thiserror::Error;

use crate::metrics::MetricError;

pub use evaluate::{evaluate, prevalence, Confusion, Evaluation, PrevalenceReport, PrevalenceRow};
pub use features::{extract_features, FeatureVector, FEATURE_NAMES, FEATURE_SCHEMA_VERSION};
pub use labels::{
    read_labeled, write_labeled, Coherency, CoherencyLabel, LabeledRecord, Provenance,
};
pub use logistic::{loss_and_gradient, sigmoid, train, LossPoint, Standardizer, TrainConfig};
pub use model::{predict, CoherencyModel, CoherencyScorer, LocalScorer, Prediction, TrainingMetadata};
pub use split::{stratified_split, Split, SplitAssignment, SplitRatios};
pub use weak::{weak_label, QuestionStats, PROPAGATION_THRESHOLD};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoherencyError {
    #[error("training data contains a single class")]
    SingleClassTraining,
    #[error("loss became non-finite at epoch {0}")]
    NonFiniteLoss(usize),
    #[error("model schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("no records of class {0}")]
    EmptyClass(Coherency),
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    InvalidRatios([f64; 3]),
    #[error("duplicate record id {0}")]
    DuplicateId(String),
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("no records given")]
    EmptyInput,
    #[error("record {0} carries a predicted label")]
    PredictedLabel(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("scorer failure: {0}")]
    Scorer(String),
    #[error("invalid format: {0}")]
    Format(String),
}

/// The decision rule: coherent iff `s > 0.5` (strict).
pub fn decide(score: f64) -> Coherency {
    if score > 0.5 {
        Coherency::Coherent
    } else {
        Coherency::Incoherent
    }
}
