#![allow(dead_code)]

use std::path::Path;

use facetkit_annotation::{
    AnnotationService, Choice, ComparisonPair, GoldAnswer, GoldItem, ServiceConfig,
};
use facetkit_core::corpus::{FacetSet, Query};
use facetkit_core::stats::Criterion;

pub fn pairs(n: usize) -> Vec<ComparisonPair> {
    (0..n)
        .map(|i| ComparisonPair {
            query: Query::new(format!("query {i}")).unwrap(),
            ground_truth: FacetSet::from_texts([format!("truth {i} a"), format!("truth {i} b")]).unwrap(),
            generated: FacetSet::from_texts([format!("model {i} a"), format!("model {i} b")]).unwrap(),
        })
        .collect()
}

pub fn gold() -> Vec<GoldItem> {
    (0..5)
        .map(|i| GoldItem {
            gold_id: format!("g{i}"),
            query: format!("gold query {i}"),
            criterion: Criterion::Quality,
            left: vec!["coupe".into(), "hatchback".into()],
            right: vec!["coupe".into(), "coupe".into()],
            answer: if i % 2 == 0 { Choice::Left } else { Choice::Right },
        })
        .collect()
}

/// Answers to the gold set with the first `correct` items right.
pub fn answers(correct: usize) -> Vec<GoldAnswer> {
    gold()
        .into_iter()
        .enumerate()
        .map(|(i, g)| GoldAnswer {
            gold_id: g.gold_id,
            choice: if i < correct {
                g.answer
            } else if g.answer == Choice::Left {
                Choice::Right
            } else {
                Choice::Left
            },
        })
        .collect()
}

pub fn open(log: &Path, n_pairs: usize, seed: u64) -> AnnotationService {
    let mut config = ServiceConfig::new(log);
    config.seed = seed;
    AnnotationService::open(config, &pairs(n_pairs), gold()).unwrap()
}
