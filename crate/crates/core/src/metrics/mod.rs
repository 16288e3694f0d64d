//! Order-invariant similarity metrics between a candidate and a reference
//! facet set.
//!
//! * [`set_bleu`]: clipped n-gram precision pooled within facets.
//! * [`meteor_set`]: facet-aligned METEOR with exact and stem matching.
//! * [`semantic_f1`]: greedy max-cosine token matching over an
//!   [`EmbeddingProvider`].
//!
//! [`evaluate_corpus`] runs all three over ground-truth / generated pairs
//! and aggregates by reference set size.

mod bleu;
mod embedding;
mod meteor;
pub mod porter;
mod report;
mod semantic;

use thiserror::Error;

pub use bleu::{set_bleu, SetBleuScore, MAX_BLEU_ORDER};
pub use embedding::{
    embed_hashed_trigrams, EmbeddingProvider, HashedTrigramEmbedder, HASHED_DIMENSION,
    HASH_SEED,
};
pub use meteor::{meteor_pair, meteor_set, MeteorScore, PairMeteor};
pub use report::{
    evaluate_corpus, evaluate_corpus_scored, pair_records, SetScorer, AggregateRow, MetricReport, PairMetrics, RecordPair,
    UnpairedQuery,
};
pub use semantic::{cosine, semantic_f1, SemanticScore};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("facet set is empty")]
    EmptySet,
    #[error("cannot embed an empty token")]
    EmptyToken,
    #[error("n-gram order must be in 1..=4, got {0}")]
    InvalidOrder(usize),
    #[error("embedding provider failure: {0}")]
    ProviderFailure(String),
}
