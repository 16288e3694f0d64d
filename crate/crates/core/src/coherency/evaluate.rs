use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Coherency, CoherencyError, CoherencyScorer, LabeledRecord};
use crate::corpus::ClarificationRecord;

/// Counts with `Coherent` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub true_coherent: usize,
    pub false_coherent: usize,
    pub true_incoherent: usize,
    pub false_incoherent: usize,
}

impl Confusion {
    pub fn add(&mut self, gold: Coherency, predicted: Coherency) {
        match (gold, predicted) {
            (Coherency::Coherent, Coherency::Coherent) => self.true_coherent += 1,
            (Coherency::Incoherent, Coherency::Coherent) => self.false_coherent += 1,
            (Coherency::Incoherent, Coherency::Incoherent) => self.true_incoherent += 1,
            (Coherency::Coherent, Coherency::Incoherent) => self.false_incoherent += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.true_coherent + self.false_coherent + self.true_incoherent + self.false_incoherent
    }

    pub fn accuracy(&self) -> f64 {
        (self.true_coherent + self.true_incoherent) as f64 / self.total() as f64
    }

    fn f1(tp: usize, fp: usize, fneg: usize) -> f64 {
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fneg == 0 { 0.0 } else { tp as f64 / (tp + fneg) as f64 };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    }

    pub fn f1_coherent(&self) -> f64 {
        Self::f1(self.true_coherent, self.false_coherent, self.false_incoherent)
    }

    pub fn f1_incoherent(&self) -> f64 {
        Self::f1(self.true_incoherent, self.false_incoherent, self.false_coherent)
    }

    pub fn macro_f1(&self) -> f64 {
        (self.f1_coherent() + self.f1_incoherent()) / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub confusion: Confusion,
}

/// Accuracy and macro-F1 of `scorer` on labeled test records.
pub fn evaluate(
    scorer: &dyn CoherencyScorer,
    test: &[LabeledRecord],
) -> Result<Evaluation, CoherencyError> {
    if test.is_empty() {
        return Err(CoherencyError::EmptyTestSet);
    }
    let mut confusion = Confusion::default();
    for r in test {
        r.ensure_not_predicted()?;
        let predicted = scorer.predict(&r.query, &r.facets)?.label;
        confusion.add(r.label.value, predicted);
    }
    Ok(Evaluation {
        accuracy: confusion.accuracy(),
        macro_f1: confusion.macro_f1(),
        confusion,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceRow {
    pub m: usize,
    pub records: usize,
    pub incoherent: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrevalenceReport {
    pub records: usize,
    pub incoherent: usize,
    pub fraction: f64,
    /// Empty unless grouping by facet-set size was requested.
    pub by_m: Vec<PrevalenceRow>,
}

/// Fraction of records the scorer labels incoherent, optionally per `M`.
pub fn prevalence(
    scorer: &dyn CoherencyScorer,
    records: &[ClarificationRecord],
    group_by_m: bool,
) -> Result<PrevalenceReport, CoherencyError> {
    if records.is_empty() {
        return Err(CoherencyError::EmptyInput);
    }
    let mut groups: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut incoherent = 0;
    for r in records {
        let is_incoherent = scorer.predict(&r.query, &r.facets)?.label == Coherency::Incoherent;
        let g = groups.entry(r.facets.len()).or_default();
        g.0 += 1;
        if is_incoherent {
            g.1 += 1;
            incoherent += 1;
        }
    }
    let by_m = if group_by_m {
        groups
            .into_iter()
            .map(|(m, (n, inc))| PrevalenceRow {
                m,
                records: n,
                incoherent: inc,
                fraction: inc as f64 / n as f64,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(PrevalenceReport {
        records: records.len(),
        incoherent,
        fraction: incoherent as f64 / records.len() as f64,
        by_m,
    })
}
