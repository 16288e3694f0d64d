use std::collections::{BTreeMap, HashSet};

use super::{Coherency, CoherencyLabel, LabeledRecord, Provenance};
use crate::corpus::{normalize_facet, ClarificationRecord, FacetSet, Query};

/// A question's coherent fraction must exceed this for its sets to be
/// labeled coherent by propagation.
pub const PROPAGATION_THRESHOLD: f64 = 0.95;

pub const RULE_DUPLICATE: &str = "duplicate-facet";
pub const RULE_QUERY_CONTAINMENT: &str = "query-containment";

/// Fraction of expert-labeled facet sets judged coherent, per normalized
/// clarifying question.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QuestionStats {
    fractions: BTreeMap<String, (usize, usize)>,
}

impl QuestionStats {
    /// Builds statistics from expert labels only; other provenances are
    /// ignored.
    pub fn from_expert_labels<'a>(records: impl IntoIterator<Item = &'a LabeledRecord>) -> Self {
        let mut stats = Self::default();
        for r in records {
            if r.label.provenance == Provenance::Expert {
                stats.add(&r.question, r.label.value);
            }
        }
        stats
    }

    pub fn add(&mut self, question: &str, value: Coherency) {
        let key = normalize_facet(question);
        if key.is_empty() {
            return;
        }
        let entry = self.fractions.entry(key).or_insert((0, 0));
        entry.1 += 1;
        if value == Coherency::Coherent {
            entry.0 += 1;
        }
    }

    /// Sets the coherent fraction directly, as `coherent / total`.
    pub fn insert_counts(&mut self, question: &str, coherent: usize, total: usize) {
        self.fractions.insert(normalize_facet(question), (coherent, total));
    }

    pub fn coherent_fraction(&self, question: &str) -> Option<f64> {
        self.fractions
            .get(&normalize_facet(question))
            .filter(|(_, n)| *n > 0)
            .map(|(c, n)| *c as f64 / *n as f64)
    }

    pub fn len(&self) -> usize {
        self.fractions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fractions.is_empty()
    }
}

pub(crate) fn has_duplicate(facets: &FacetSet) -> bool {
    let mut seen = HashSet::new();
    facets.iter().any(|f| !seen.insert(f.normalized()))
}

pub(crate) fn contains_query(facets: &FacetSet, query: &Query) -> bool {
    let q = query.normalized();
    facets.iter().any(|f| f.normalized().contains(&q))
}

/// Applies the weak-labeling rules in order:
///
/// 1. two facets equal after normalization: incoherent (`weak:duplicate-facet`)
/// 2. a facet containing the normalized query: incoherent
///    (`weak:query-containment`)
/// 3. the question's coherent fraction is above 0.95: coherent (propagated)
pub fn weak_label(
    record: &ClarificationRecord,
    question_stats: Option<&QuestionStats>,
) -> Option<CoherencyLabel> {
    if has_duplicate(&record.facets) {
        return Some(CoherencyLabel::new(
            Coherency::Incoherent,
            Provenance::WeakRule(RULE_DUPLICATE.into()),
        ));
    }
    if contains_query(&record.facets, &record.query) {
        return Some(CoherencyLabel::new(
            Coherency::Incoherent,
            Provenance::WeakRule(RULE_QUERY_CONTAINMENT.into()),
        ));
    }
    let fraction = question_stats?.coherent_fraction(&record.question)?;
    (fraction > PROPAGATION_THRESHOLD)
        .then(|| CoherencyLabel::new(Coherency::Coherent, Provenance::Propagated))
}
