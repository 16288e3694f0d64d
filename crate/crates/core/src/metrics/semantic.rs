use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{EmbeddingProvider, MetricError};
use crate::corpus::FacetSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SemanticScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn pooled_tokens(set: &FacetSet) -> Vec<&String> {
    set.iter().flat_map(|f| f.terms()).collect()
}

/// Greedy max-cosine matching over all tokens of each set.
///
/// Identical tokens match with similarity exactly 1. Per-token maxima are
/// clamped to [0, 1] so scores stay in range under signed embeddings.
pub fn semantic_f1(
    candidate: &FacetSet,
    reference: &FacetSet,
    provider: &dyn EmbeddingProvider,
) -> Result<SemanticScore, MetricError> {
    if candidate.is_empty() || reference.is_empty() {
        return Err(MetricError::EmptySet);
    }
    let cand = pooled_tokens(candidate);
    let refs = pooled_tokens(reference);

    let vocab: Vec<String> = cand
        .iter()
        .chain(refs.iter())
        .map(|t| (*t).clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let vectors = provider.embed(&vocab)?;
    if vectors.len() != vocab.len() {
        return Err(MetricError::ProviderFailure(format!(
            "expected {} vectors, got {}",
            vocab.len(),
            vectors.len()
        )));
    }
    let table: BTreeMap<&str, &Vec<f64>> =
        vocab.iter().map(String::as_str).zip(vectors.iter()).collect();

    let similarity = |a: &str, b: &str| -> f64 {
        if a == b {
            1.0
        } else {
            cosine(table[a], table[b]).clamp(0.0, 1.0)
        }
    };
    let directional = |from: &[&String], to: &[&String]| -> f64 {
        let total: f64 = from
            .iter()
            .map(|a| to.iter().map(|b| similarity(a, b)).fold(0.0, f64::max))
            .sum();
        total / from.len() as f64
    };

    let precision = directional(&cand, &refs);
    let recall = directional(&refs, &cand);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(SemanticScore { precision, recall, f1 })
}
