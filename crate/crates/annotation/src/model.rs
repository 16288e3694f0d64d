use std::fmt;

use chrono::{DateTime, Utc};
use facetkit_core::corpus::{FacetSet, Query};
use facetkit_core::stats::Criterion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Screen position of a facet set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    Left,
    Right,
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Choice::Left => "left",
            Choice::Right => "right",
        })
    }
}

/// A ground-truth / generated pair to be compared by annotators.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonPair {
    pub query: Query,
    pub ground_truth: FacetSet,
    pub generated: FacetSet,
}

/// One comparison under one criterion. The side assignment is fixed when
/// the task is created and never leaves the service except through export.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationTask {
    pub task_id: String,
    pub query: Query,
    pub criterion: Criterion,
    pub ground_truth: FacetSet,
    pub generated: FacetSet,
    pub side_assignment_seed: u64,
    pub ground_truth_on_left: bool,
}

impl AnnotationTask {
    /// Builds a task whose left/right placement is drawn from
    /// `side_assignment_seed`.
    pub fn new(task_id: String, pair: &ComparisonPair, criterion: Criterion, side_assignment_seed: u64) -> Self {
        let ground_truth_on_left = ChaCha8Rng::seed_from_u64(side_assignment_seed).gen_bool(0.5);
        Self {
            task_id,
            query: pair.query.clone(),
            criterion,
            ground_truth: pair.ground_truth.clone(),
            generated: pair.generated.clone(),
            side_assignment_seed,
            ground_truth_on_left,
        }
    }

    pub fn left(&self) -> &FacetSet {
        if self.ground_truth_on_left {
            &self.ground_truth
        } else {
            &self.generated
        }
    }

    pub fn right(&self) -> &FacetSet {
        if self.ground_truth_on_left {
            &self.generated
        } else {
            &self.ground_truth
        }
    }

    /// Maps a screen choice to a source: A is ground truth, B generated.
    pub fn resolve(&self, choice: Choice) -> facetkit_core::stats::Preference {
        use facetkit_core::stats::Preference;
        match (choice, self.ground_truth_on_left) {
            (Choice::Left, true) | (Choice::Right, false) => Preference::A,
            _ => Preference::B,
        }
    }

    /// The payload sent to annotators. Carries no source identity.
    pub fn view(&self) -> TaskView {
        TaskView {
            task_id: self.task_id.clone(),
            query: self.query.text().to_string(),
            criterion: self.criterion,
            left: self.left().raw_texts(),
            right: self.right().raw_texts(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskView {
    pub task_id: String,
    pub query: String,
    pub criterion: Criterion,
    pub left: Vec<String>,
    pub right: Vec<String>,
}

/// A qualification item with a known expert answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldItem {
    pub gold_id: String,
    pub query: String,
    pub criterion: Criterion,
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub answer: Choice,
}

impl GoldItem {
    /// The item without its answer.
    pub fn view(&self) -> TaskView {
        TaskView {
            task_id: self.gold_id.clone(),
            query: self.query.clone(),
            criterion: self.criterion,
            left: self.left.clone(),
            right: self.right.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnswer {
    pub gold_id: String,
    pub choice: Choice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualificationStatus {
    Unqualified,
    Qualified,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotator {
    pub annotator_id: String,
    pub qualification: QualificationStatus,
    pub qualification_score: f64,
}

impl Annotator {
    pub fn unqualified(annotator_id: &str) -> Self {
        Self {
            annotator_id: annotator_id.to_string(),
            qualification: QualificationStatus::Unqualified,
            qualification_score: 0.0,
        }
    }
}

/// Body of `POST /judgments`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgmentRequest {
    pub task_id: String,
    pub annotator_id: String,
    pub criterion: Criterion,
    pub choice: Choice,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub task_id: String,
    pub annotator_id: String,
    pub criterion: Criterion,
    pub choice: Choice,
    pub received_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acknowledgment {
    pub task_id: String,
    pub annotator_id: String,
    /// Judgments now recorded for the task.
    pub judgments: usize,
    pub complete: bool,
}
