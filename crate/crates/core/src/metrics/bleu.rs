use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::corpus::FacetSet;

pub const MAX_BLEU_ORDER: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetBleuScore {
    /// Cumulative BLEU at n = 1..=max_n (index 0 is n = 1).
    pub per_n: Vec<f64>,
    /// Clipped precision p_n at each order.
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
}

impl SetBleuScore {
    /// Cumulative score at order `n` (1-based).
    pub fn at(&self, n: usize) -> f64 {
        self.per_n[n - 1]
    }
}

fn ngram_counts(set: &FacetSet, n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for facet in set {
        for gram in facet.terms().windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Set-level BLEU.
///
/// n-grams are taken within each facet and pooled over the set, so no
/// n-gram spans two facets and facet order cannot matter. Precision at an
/// order where the candidate has no n-grams is 1 if the reference has none
/// either and 0 otherwise. No smoothing.
pub fn set_bleu(
    candidate: &FacetSet,
    reference: &FacetSet,
    max_n: usize,
) -> Result<SetBleuScore, MetricError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptySet);
    }
    if !(1..=MAX_BLEU_ORDER).contains(&max_n) {
        return Err(MetricError::InvalidOrder(max_n));
    }

    let mut precisions = Vec::with_capacity(max_n);
    for n in 1..=max_n {
        let cand = ngram_counts(candidate, n);
        let refs = ngram_counts(reference, n);
        let total: usize = cand.values().sum();
        let p = if total == 0 {
            if refs.is_empty() {
                1.0
            } else {
                0.0
            }
        } else {
            let clipped: usize = cand
                .iter()
                .map(|(g, &c)| c.min(refs.get(g).copied().unwrap_or(0)))
                .sum();
            clipped as f64 / total as f64
        };
        precisions.push(p);
    }

    let c = candidate.token_count() as f64;
    let r = reference.token_count() as f64;
    let brevity_penalty = if c >= r { 1.0 } else { (1.0 - r / c).exp() };

    let mut per_n = Vec::with_capacity(max_n);
    let mut log_sum = 0.0;
    let mut zero = false;
    for (k, &p) in precisions.iter().enumerate() {
        if p == 0.0 {
            zero = true;
        } else {
            log_sum += p.ln();
        }
        let n = (k + 1) as f64;
        per_n.push(if zero {
            0.0
        } else {
            brevity_penalty * (log_sum / n).exp()
        });
    }

    Ok(SetBleuScore { per_n, precisions, brevity_penalty })
}
