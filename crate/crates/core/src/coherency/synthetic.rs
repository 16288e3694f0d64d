//! Seeded synthetic clarification corpus labeled by the weak rules.
//!
//! Clean sets are drawn from one topical axis per question and carry a
//! question whose expert coherent fraction is 1.0, so the propagation rule
//! labels them coherent. Noisy sets get a duplicated facet or a facet that
//! repeats the query, so the duplicate or containment rule labels them
//! incoherent. Used as a training and acceptance fixture.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{weak_label, LabeledRecord, QuestionStats};
use crate::corpus::{ClarificationRecord, FacetSet, Query};

struct Axis {
    question: &'static str,
    queries: &'static [&'static str],
    values: &'static [&'static str],
}

const AXES: &[Axis] = &[
    Axis {
        question: "Who is the gift for?",
        queries: &["gift ideas", "christmas presents", "birthday surprise", "anniversary gift"],
        values: &["men", "women", "kids", "teens", "grandparents", "coworkers", "dad", "mom"],
    },
    Axis {
        question: "Select the body style",
        queries: &["1982 mustang", "used sedan", "ford focus", "honda civic"],
        values: &["coupe", "hatchback", "convertible", "sedan", "wagon", "fastback"],
    },
    Axis {
        question: "Which platform?",
        queries: &["new call of duty game", "minecraft", "fifa 23", "elden ring"],
        values: &["pc", "ps4", "ps5", "xbox one", "nintendo switch", "mac"],
    },
    Axis {
        question: "What type of sales?",
        queries: &["police sales", "auction listings", "surplus vehicles"],
        values: &["police car sales", "police motorcycle sales", "police boat sales",
                  "police truck sales", "police van sales"],
    },
    Axis {
        question: "Which city?",
        queries: &["weather forecast", "hotel deals", "restaurants nearby"],
        values: &["new york", "chicago", "los angeles", "seattle", "boston", "denver"],
    },
];

/// Generates `n` records; about half are made incoherent. Every record
/// receives a weak label. Deterministic given `seed`.
pub fn weakly_labeled_corpus(n: usize, seed: u64) -> Vec<LabeledRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = QuestionStats::default();
    for axis in AXES {
        stats.insert_counts(axis.question, 50, 50);
    }

    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let axis = &AXES[rng.gen_range(0..AXES.len())];
        let query = *axis.queries.choose(&mut rng).expect("non-empty");
        let m = rng.gen_range(2..=5usize).min(axis.values.len());
        let mut facets: Vec<String> = axis
            .values
            .choose_multiple(&mut rng, m)
            .map(|s| s.to_string())
            .collect();

        if rng.gen_bool(0.5) {
            let slot = rng.gen_range(0..facets.len());
            if rng.gen_bool(0.5) {
                // duplicate with casing/whitespace noise
                let dup = facets[(slot + 1) % facets.len()].to_uppercase().replace(' ', "  ");
                facets[slot] = dup;
            } else {
                facets[slot] = format!("{query} for {}", facets[slot]);
            }
        }

        let record = ClarificationRecord::ground_truth(
            Query::new(query).expect("fixture query"),
            axis.question,
            FacetSet::from_texts(facets).expect("fixture facets"),
        );
        if let Some(label) = weak_label(&record, Some(&stats)) {
            out.push(LabeledRecord {
                id: format!("syn{:05}", out.len()),
                query: record.query,
                question: record.question,
                facets: record.facets,
                label,
            });
        }
    }
    out
}
