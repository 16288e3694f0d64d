use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use chrono::Utc;
use facetkit_core::stats::{Criterion, ResolvedComparison};
use serde::{Deserialize, Serialize};

use crate::log::{Event, EventLog};
use crate::model::{
    Acknowledgment, AnnotationTask, Annotator, ComparisonPair, GoldAnswer, GoldItem, Judgment,
    JudgmentRequest, QualificationStatus, TaskView,
};
use crate::AnnotationError;

pub const DEFAULT_JUDGMENTS_PER_TASK: usize = 2;
pub const DEFAULT_QUALIFICATION_THRESHOLD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub seed: u64,
    pub judgments_per_task: usize,
    pub qualification_threshold: f64,
    pub log_path: PathBuf,
}

impl ServiceConfig {
    pub fn new(log_path: impl Into<PathBuf>) -> Self {
        Self {
            seed: 0,
            judgments_per_task: DEFAULT_JUDGMENTS_PER_TASK,
            qualification_threshold: DEFAULT_QUALIFICATION_THRESHOLD,
            log_path: log_path.into(),
        }
    }
}

/// Everything the event log determines. Two services replaying the same
/// log over the same tasks have equal states.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ServiceState {
    pub annotators: BTreeMap<String, Annotator>,
    /// Judgments per task id, in arrival order.
    pub judgments: BTreeMap<String, Vec<Judgment>>,
    /// Outstanding sticky assignment per (annotator, criterion).
    pub assignments: BTreeMap<(String, Criterion), String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualificationResult {
    pub annotator_id: String,
    pub status: QualificationStatus,
    pub score: f64,
    pub correct: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Export {
    pub criterion: Criterion,
    /// Complete tasks in task-id order, choices in arrival order.
    pub comparisons: Vec<ResolvedComparison>,
    /// Tasks with fewer than the required judgments.
    pub incomplete: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionProgress {
    pub tasks: usize,
    pub complete: usize,
    pub incomplete: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub tasks: usize,
    pub complete: usize,
    pub incomplete: usize,
    pub judgments: usize,
    pub by_criterion: BTreeMap<Criterion, CriterionProgress>,
    /// Judgments recorded per annotator.
    pub annotators: BTreeMap<String, usize>,
}

pub struct AnnotationService {
    config: ServiceConfig,
    tasks: Vec<AnnotationTask>,
    index: HashMap<String, usize>,
    gold: Vec<GoldItem>,
    state: ServiceState,
    log: EventLog,
}

/// splitmix64 step; spreads consecutive task indices over the seed space.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One task per pair and criterion, ids `p{index:04}-{criterion}`, with
/// side seeds derived from the service seed and the task position.
pub fn build_tasks(pairs: &[ComparisonPair], seed: u64) -> Vec<AnnotationTask> {
    let mut tasks = Vec::with_capacity(pairs.len() * 2);
    for (i, pair) in pairs.iter().enumerate() {
        for criterion in [Criterion::Coherency, Criterion::Quality] {
            let position = tasks.len() as u64;
            tasks.push(AnnotationTask::new(
                format!("p{i:04}-{criterion}"),
                pair,
                criterion,
                mix(seed ^ mix(position)),
            ));
        }
    }
    tasks
}

impl AnnotationService {
    /// Builds the task pool and replays the event log at
    /// `config.log_path`, creating it if absent.
    pub fn open(
        config: ServiceConfig,
        pairs: &[ComparisonPair],
        gold: Vec<GoldItem>,
    ) -> Result<Self, AnnotationError> {
        if config.judgments_per_task == 0 {
            return Err(AnnotationError::Config("judgments per task must be positive".into()));
        }
        if !(0.0..=1.0).contains(&config.qualification_threshold) {
            return Err(AnnotationError::Config("qualification threshold must be in [0, 1]".into()));
        }
        let tasks = build_tasks(pairs, config.seed);
        let index = tasks.iter().enumerate().map(|(i, t)| (t.task_id.clone(), i)).collect();
        let (log, events) = EventLog::open(&config.log_path)?;
        let mut service = Self { config, tasks, index, gold, state: ServiceState::default(), log };
        for (i, event) in events.into_iter().enumerate() {
            service
                .apply(event)
                .map_err(|e| AnnotationError::Log(format!("replaying line {}: {e}", i + 1)))?;
        }
        Ok(service)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn state(&self) -> &ServiceState {
        &self.state
    }

    pub fn tasks(&self) -> &[AnnotationTask] {
        &self.tasks
    }

    pub fn log_len(&self) -> usize {
        self.log.len()
    }

    pub fn gold_views(&self) -> Vec<TaskView> {
        self.gold.iter().map(GoldItem::view).collect()
    }

    fn task(&self, task_id: &str) -> Result<&AnnotationTask, AnnotationError> {
        self.index
            .get(task_id)
            .map(|&i| &self.tasks[i])
            .ok_or_else(|| AnnotationError::UnknownTask(task_id.to_string()))
    }

    fn judgment_count(&self, task_id: &str) -> usize {
        self.state.judgments.get(task_id).map_or(0, Vec::len)
    }

    fn has_judged(&self, task_id: &str, annotator_id: &str) -> bool {
        self.state
            .judgments
            .get(task_id)
            .is_some_and(|js| js.iter().any(|j| j.annotator_id == annotator_id))
    }

    fn require_qualified(&self, annotator_id: &str) -> Result<(), AnnotationError> {
        match self.state.annotators.get(annotator_id).map(|a| a.qualification) {
            Some(QualificationStatus::Qualified) => Ok(()),
            _ => Err(AnnotationError::NotQualified(annotator_id.to_string())),
        }
    }

    /// Validates an event against the current state. Live requests and log
    /// replay go through the same checks.
    fn check(&self, event: &Event) -> Result<(), AnnotationError> {
        match event {
            Event::Qualification { annotator_id, .. } => {
                match self.state.annotators.get(annotator_id).map(|a| a.qualification) {
                    Some(QualificationStatus::Qualified) => {
                        Err(AnnotationError::AlreadyQualified(annotator_id.clone()))
                    }
                    Some(QualificationStatus::Rejected) => {
                        Err(AnnotationError::AlreadyRejected(annotator_id.clone()))
                    }
                    _ => Ok(()),
                }
            }
            Event::Assignment { annotator_id, criterion, task_id } => {
                self.require_qualified(annotator_id)?;
                let task = self.task(task_id)?;
                if task.criterion != *criterion {
                    return Err(AnnotationError::CriterionMismatch(task_id.clone()));
                }
                Ok(())
            }
            Event::Judgment { task_id, annotator_id, criterion, .. } => {
                self.require_qualified(annotator_id)?;
                let task = self.task(task_id)?;
                if task.criterion != *criterion {
                    return Err(AnnotationError::CriterionMismatch(task_id.clone()));
                }
                if self.has_judged(task_id, annotator_id) {
                    return Err(AnnotationError::DuplicateJudgment {
                        task_id: task_id.clone(),
                        annotator_id: annotator_id.clone(),
                    });
                }
                if self.judgment_count(task_id) >= self.config.judgments_per_task {
                    return Err(AnnotationError::TaskComplete(task_id.clone()));
                }
                Ok(())
            }
        }
    }

    fn apply(&mut self, event: Event) -> Result<(), AnnotationError> {
        self.check(&event)?;
        match event {
            Event::Qualification { annotator_id, status, score, .. } => {
                self.state.annotators.insert(
                    annotator_id.clone(),
                    Annotator { annotator_id, qualification: status, qualification_score: score },
                );
            }
            Event::Assignment { annotator_id, criterion, task_id } => {
                self.state.assignments.insert((annotator_id, criterion), task_id);
            }
            Event::Judgment { task_id, annotator_id, criterion, choice, received_at } => {
                let key = (annotator_id.clone(), criterion);
                if self.state.assignments.get(&key) == Some(&task_id) {
                    self.state.assignments.remove(&key);
                }
                self.state.judgments.entry(task_id.clone()).or_default().push(Judgment {
                    task_id,
                    annotator_id,
                    criterion,
                    choice,
                    received_at,
                });
            }
        }
        Ok(())
    }

    /// Checks, logs, then applies: a request that fails validation leaves
    /// both the log and the state untouched.
    fn record(&mut self, event: Event) -> Result<(), AnnotationError> {
        self.check(&event)?;
        self.log.append(&event)?;
        self.apply(event)
    }

    /// Scores gold answers; Qualified iff the fraction correct reaches the
    /// threshold. Unanswered and unknown gold items count as wrong.
    pub fn run_qualification(
        &mut self,
        annotator_id: &str,
        answers: &[GoldAnswer],
    ) -> Result<QualificationResult, AnnotationError> {
        if self.gold.is_empty() {
            return Err(AnnotationError::UnknownGoldSet);
        }
        let given: HashMap<&str, _> = answers.iter().map(|a| (a.gold_id.as_str(), a.choice)).collect();
        let correct = self
            .gold
            .iter()
            .filter(|g| given.get(g.gold_id.as_str()) == Some(&g.answer))
            .count();
        let total = self.gold.len();
        let score = correct as f64 / total as f64;
        let status = if score >= self.config.qualification_threshold {
            QualificationStatus::Qualified
        } else {
            QualificationStatus::Rejected
        };
        self.record(Event::Qualification {
            annotator_id: annotator_id.to_string(),
            status,
            score,
            at: Utc::now(),
        })?;
        Ok(QualificationResult { annotator_id: annotator_id.to_string(), status, score, correct, total })
    }

    pub fn annotator(&self, annotator_id: &str) -> Annotator {
        self.state
            .annotators
            .get(annotator_id)
            .cloned()
            .unwrap_or_else(|| Annotator::unqualified(annotator_id))
    }

    /// Next task for the annotator under `criterion`, or `None` when
    /// nothing is left for them.
    ///
    /// An outstanding assignment is returned again until it is judged.
    /// Otherwise the open task with the most judgments is chosen (first in
    /// task order on ties), skipping tasks already judged by this annotator
    /// and tasks whose remaining slots are held by other annotators.
    pub fn next_task(
        &mut self,
        annotator_id: &str,
        criterion: Criterion,
    ) -> Result<Option<TaskView>, AnnotationError> {
        self.require_qualified(annotator_id)?;
        let key = (annotator_id.to_string(), criterion);
        if let Some(task_id) = self.state.assignments.get(&key) {
            let task_id = task_id.clone();
            if !self.has_judged(&task_id, annotator_id)
                && self.judgment_count(&task_id) < self.config.judgments_per_task
            {
                return Ok(Some(self.task(&task_id)?.view()));
            }
        }

        let mut held: HashMap<&str, usize> = HashMap::new();
        for ((other, _), task_id) in &self.state.assignments {
            if other != annotator_id {
                *held.entry(task_id.as_str()).or_default() += 1;
            }
        }
        let chosen = self
            .tasks
            .iter()
            .filter(|t| t.criterion == criterion && !self.has_judged(&t.task_id, annotator_id))
            .filter(|t| {
                let taken = self.judgment_count(&t.task_id) + held.get(t.task_id.as_str()).copied().unwrap_or(0);
                taken < self.config.judgments_per_task
            })
            .max_by(|a, b| {
                self.judgment_count(&a.task_id)
                    .cmp(&self.judgment_count(&b.task_id))
                    .then_with(|| self.index[&b.task_id].cmp(&self.index[&a.task_id]))
            })
            .map(|t| t.task_id.clone());

        let Some(task_id) = chosen else {
            return Ok(None);
        };
        self.record(Event::Assignment {
            annotator_id: annotator_id.to_string(),
            criterion,
            task_id: task_id.clone(),
        })?;
        Ok(Some(self.task(&task_id)?.view()))
    }

    pub fn submit_judgment(&mut self, request: JudgmentRequest) -> Result<Acknowledgment, AnnotationError> {
        let JudgmentRequest { task_id, annotator_id, criterion, choice } = request;
        self.record(Event::Judgment {
            task_id: task_id.clone(),
            annotator_id: annotator_id.clone(),
            criterion,
            choice,
            received_at: Utc::now(),
        })?;
        let judgments = self.judgment_count(&task_id);
        Ok(Acknowledgment {
            task_id,
            annotator_id,
            judgments,
            complete: judgments >= self.config.judgments_per_task,
        })
    }

    /// Complete tasks resolved to A (ground truth) / B (generated).
    pub fn export(&self, criterion: Criterion) -> Export {
        let mut tasks: Vec<&AnnotationTask> =
            self.tasks.iter().filter(|t| t.criterion == criterion).collect();
        tasks.sort_by(|a, b| a.task_id.cmp(&b.task_id));
        let mut comparisons = Vec::new();
        let mut incomplete = Vec::new();
        for t in tasks {
            let judgments = self.state.judgments.get(&t.task_id).map_or(&[][..], Vec::as_slice);
            if judgments.len() >= self.config.judgments_per_task {
                comparisons.push(ResolvedComparison {
                    task_id: t.task_id.clone(),
                    criterion,
                    choices: judgments.iter().map(|j| t.resolve(j.choice)).collect(),
                });
            } else {
                incomplete.push(t.task_id.clone());
            }
        }
        Export { criterion, comparisons, incomplete }
    }

    pub fn progress(&self) -> Progress {
        let mut by_criterion: BTreeMap<Criterion, CriterionProgress> = BTreeMap::new();
        for t in &self.tasks {
            let entry = by_criterion
                .entry(t.criterion)
                .or_insert(CriterionProgress { tasks: 0, complete: 0, incomplete: 0 });
            entry.tasks += 1;
            if self.judgment_count(&t.task_id) >= self.config.judgments_per_task {
                entry.complete += 1;
            } else {
                entry.incomplete += 1;
            }
        }
        let mut annotators: BTreeMap<String, usize> = BTreeMap::new();
        for j in self.state.judgments.values().flatten() {
            *annotators.entry(j.annotator_id.clone()).or_default() += 1;
        }
        let complete = by_criterion.values().map(|c| c.complete).sum();
        Progress {
            tasks: self.tasks.len(),
            complete,
            incomplete: self.tasks.len() - complete,
            judgments: self.state.judgments.values().map(Vec::len).sum(),
            by_criterion,
            annotators,
        }
    }
}
