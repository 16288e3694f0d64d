//! Evaluation toolkit for query facet sets used in search clarification.
//!
//! * [`corpus`]: clarification records and their file formats
//! * [`metrics`]: Set BLEU, METEOR and embedding-based F1 between facet sets
//! * [`coherency`]: weak labels, features and the logistic coherency scorer
//! * [`stats`]: pairwise judgment aggregation and significance tests
//! * [`remote`]: HTTP clients for external embedding and scoring services

pub mod coherency;
pub mod corpus;
pub mod metrics;
pub mod remote;
pub mod stats;
