use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::weak::{contains_query, has_duplicate};
use super::CoherencyError;
use crate::corpus::{Facet, FacetSet, Query};
use crate::metrics::{cosine, EmbeddingProvider};

/// Bumped whenever a feature is added, removed, reordered or redefined.
pub const FEATURE_SCHEMA_VERSION: u32 = 1;

pub const FEATURE_NAMES: [&str; 8] = [
    "has_duplicate",
    "contains_query",
    "token_count_dispersion",
    "mean_pairwise_cosine",
    "min_pairwise_cosine",
    "template_agreement",
    "mean_jaccard",
    "head_token_agreement",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; FEATURE_NAMES.len()],
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
    }

    pub fn has_duplicate(&self) -> f64 {
        self.values[0]
    }
    pub fn contains_query(&self) -> f64 {
        self.values[1]
    }
    pub fn token_count_dispersion(&self) -> f64 {
        self.values[2]
    }
    pub fn mean_pairwise_cosine(&self) -> f64 {
        self.values[3]
    }
    pub fn min_pairwise_cosine(&self) -> f64 {
        self.values[4]
    }
    pub fn template_agreement(&self) -> f64 {
        self.values[5]
    }
    pub fn mean_jaccard(&self) -> f64 {
        self.values[6]
    }
    pub fn head_token_agreement(&self) -> f64 {
        self.values[7]
    }
}

/// Structural template of a facet relative to the query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Template {
    starts_with_query_token: bool,
    ends_with_query_token: bool,
    contains_digit: bool,
    /// 1, 2, or 3 for three or more tokens.
    length_bucket: usize,
}

fn template(facet: &Facet, query_terms: &BTreeSet<&str>) -> Template {
    let terms = facet.terms();
    Template {
        starts_with_query_token: query_terms.contains(terms[0].as_str()),
        ends_with_query_token: query_terms.contains(terms[terms.len() - 1].as_str()),
        contains_digit: terms.iter().any(|t| t.chars().any(|c| c.is_ascii_digit())),
        length_bucket: terms.len().min(3),
    }
}

/// Fraction of items equal to the most frequent one.
fn modal_fraction<T: Ord>(items: impl IntoIterator<Item = T>) -> f64 {
    let mut counts = BTreeMap::new();
    let mut total = 0usize;
    for item in items {
        *counts.entry(item).or_insert(0usize) += 1;
        total += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    if total == 0 {
        1.0
    } else {
        top as f64 / total as f64
    }
}

fn jaccard(a: &Facet, b: &Facet) -> f64 {
    let sa: BTreeSet<&String> = a.terms().iter().collect();
    let sb: BTreeSet<&String> = b.terms().iter().collect();
    let inter = sa.intersection(&sb).count();
    let union = sa.union(&sb).count();
    inter as f64 / union as f64
}

/// Computes the coherency features of a facet set.
///
/// Facet embeddings are the re-normalized mean of their token embeddings.
/// Pairwise statistics run over unordered facet pairs and are 1.0 for a
/// single-facet set.
pub fn extract_features(
    facets: &FacetSet,
    query: &Query,
    provider: &dyn EmbeddingProvider,
) -> Result<FeatureVector, CoherencyError> {
    if facets.is_empty() {
        return Err(CoherencyError::EmptyInput);
    }
    let m = facets.len();

    let lengths: Vec<f64> = facets.iter().map(|f| f.len() as f64).collect();
    let mean_len = lengths.iter().sum::<f64>() / m as f64;
    let var = lengths.iter().map(|l| (l - mean_len).powi(2)).sum::<f64>() / m as f64;
    let dispersion = var.sqrt() / mean_len;

    let vocab: Vec<String> = facets
        .iter()
        .flat_map(|f| f.terms().iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let vectors = provider.embed(&vocab)?;
    let table: HashMap<&str, &Vec<f64>> =
        vocab.iter().map(String::as_str).zip(vectors.iter()).collect();
    let facet_vecs: Vec<Vec<f64>> = facets
        .iter()
        .map(|f| {
            let mut v = vec![0.0; provider.dimension()];
            for t in f.terms() {
                for (acc, x) in v.iter_mut().zip(table[t.as_str()].iter()) {
                    *acc += x;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            v
        })
        .collect();

    let (mean_cos, min_cos, mean_jac) = if m == 1 {
        (1.0, 1.0, 1.0)
    } else {
        let mut cos_sum = 0.0;
        let mut cos_min = f64::INFINITY;
        let mut jac_sum = 0.0;
        let mut pairs = 0usize;
        for i in 0..m {
            for j in i + 1..m {
                let c = cosine(&facet_vecs[i], &facet_vecs[j]).clamp(-1.0, 1.0);
                cos_sum += c;
                cos_min = cos_min.min(c);
                jac_sum += jaccard(&facets.facets()[i], &facets.facets()[j]);
                pairs += 1;
            }
        }
        (cos_sum / pairs as f64, cos_min, jac_sum / pairs as f64)
    };

    let query_terms_owned = query.terms();
    let query_terms: BTreeSet<&str> = query_terms_owned.iter().map(String::as_str).collect();
    let template_agreement = modal_fraction(facets.iter().map(|f| template(f, &query_terms)));
    let head_agreement = modal_fraction(facets.iter().map(|f| f.terms()[f.len() - 1].as_str()));

    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    Ok(FeatureVector {
        values: [
            flag(has_duplicate(facets)),
            flag(contains_query(facets, query)),
            dispersion,
            mean_cos,
            min_cos,
            template_agreement,
            mean_jac,
            head_agreement,
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::HashedTrigramEmbedder;

    fn features(query: &str, facets: &[&str]) -> FeatureVector {
        extract_features(
            &FacetSet::from_texts(facets.iter().copied()).unwrap(),
            &Query::new(query).unwrap(),
            &HashedTrigramEmbedder::default(),
        )
        .unwrap()
    }

    #[test]
    fn duplicates() {
        let f = features("gift ideas", &["coupe", "coupe"]);
        assert_eq!(f.has_duplicate(), 1.0);
        assert_eq!(f.mean_jaccard(), 1.0);
        assert!((f.mean_pairwise_cosine() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn equal_lengths_no_containment() {
        let f = features("gift ideas", &["men", "women"]);
        assert_eq!(f.contains_query(), 0.0);
        assert_eq!(f.token_count_dispersion(), 0.0);
        assert_eq!(f.has_duplicate(), 0.0);
    }

    #[test]
    fn shared_head_and_template() {
        let f = features("police sales", &["police car sales", "police boat sales"]);
        assert_eq!(f.head_token_agreement(), 1.0);
        assert_eq!(f.template_agreement(), 1.0);
        // {police, car, sales} vs {police, boat, sales}: 2 / 4
        assert_eq!(f.mean_jaccard(), 0.5);
    }

    #[test]
    fn mixed_templates() {
        let f = features("gift ideas", &["gift ideas for men", "women", "kids"]);
        assert_eq!(f.contains_query(), 1.0);
        assert!((f.template_agreement() - 2.0 / 3.0).abs() < 1e-12);
        // lengths 4, 1, 1: mean 2, population std sqrt(2)
        assert!((f.token_count_dispersion() - 2f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn singleton_defaults() {
        let f = features("q", &["only facet"]);
        assert_eq!(f.mean_pairwise_cosine(), 1.0);
        assert_eq!(f.min_pairwise_cosine(), 1.0);
        assert_eq!(f.mean_jaccard(), 1.0);
        assert_eq!(f.template_agreement(), 1.0);
        assert_eq!(f.head_token_agreement(), 1.0);
        assert_eq!(f.token_count_dispersion(), 0.0);
    }

    #[test]
    fn all_finite_and_in_range() {
        let f = features("new call of duty game", &["pc", "ps4", "xbox one", "new call of duty zombie game"]);
        assert!(f.values.iter().all(|v| v.is_finite()));
        assert!((-1.0..=1.0).contains(&f.min_pairwise_cosine()));
        assert!(f.min_pairwise_cosine() <= f.mean_pairwise_cosine());
        assert_eq!(f.get("contains_query"), Some(0.0));
    }
}
