//! Blind pairwise annotation service.
//!
//! Annotators qualify on a gold set, then receive comparison tasks showing
//! two facet sets for a query as "left" and "right". Which side holds the
//! ground truth is drawn per task from the service seed and is only
//! revealed through [`AnnotationService::export`], which resolves choices
//! to A (ground truth) and B (generated) for
//! [`facetkit_core::stats::aggregate_pairwise`].
//!
//! All state changes go through an append-only JSON-lines log; opening a
//! service replays the log, so restarting reconstructs the same state.

pub mod http;
mod log;
pub mod model;
mod service;

use thiserror::Error;

pub use log::{Event, EventLog};
pub use model::{
    Acknowledgment, AnnotationTask, Annotator, Choice, ComparisonPair, GoldAnswer, GoldItem,
    Judgment, JudgmentRequest, QualificationStatus, TaskView,
};
pub use service::{
    build_tasks, AnnotationService, CriterionProgress, Export, Progress, QualificationResult,
    ServiceConfig, ServiceState, DEFAULT_JUDGMENTS_PER_TASK, DEFAULT_QUALIFICATION_THRESHOLD,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnnotationError {
    #[error("no gold set configured")]
    UnknownGoldSet,
    #[error("annotator {0} is already qualified")]
    AlreadyQualified(String),
    #[error("annotator {0} was rejected and cannot retake qualification")]
    AlreadyRejected(String),
    #[error("annotator {0} is not qualified")]
    NotQualified(String),
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("task {0} belongs to a different criterion")]
    CriterionMismatch(String),
    #[error("annotator {annotator_id} already judged task {task_id}")]
    DuplicateJudgment { task_id: String, annotator_id: String },
    #[error("task {0} already has all its judgments")]
    TaskComplete(String),
    #[error("event log: {0}")]
    Log(String),
    #[error("configuration: {0}")]
    Config(String),
}

impl AnnotationError {
    /// Stable machine-readable code used in HTTP error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            AnnotationError::UnknownGoldSet => "unknown_gold_set",
            AnnotationError::AlreadyQualified(_) => "already_qualified",
            AnnotationError::AlreadyRejected(_) => "already_rejected",
            AnnotationError::NotQualified(_) => "not_qualified",
            AnnotationError::UnknownTask(_) => "unknown_task",
            AnnotationError::CriterionMismatch(_) => "criterion_mismatch",
            AnnotationError::DuplicateJudgment { .. } => "duplicate_judgment",
            AnnotationError::TaskComplete(_) => "task_complete",
            AnnotationError::Log(_) => "log_failure",
            AnnotationError::Config(_) => "configuration",
        }
    }
}
