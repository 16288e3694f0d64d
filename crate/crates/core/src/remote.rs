//! Blocking HTTP clients for an external embedding service and an external
//! coherency scorer.
//!
//! Embedding: `POST {base}/embed` with `{"tokens": [...]}`, answered by
//! `{"vectors": [[...], ...]}`. Scoring: `POST {base}/score` with
//! `{"query": ..., "facets": [...]}`, answered by `{"s": number}`.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::coherency::{CoherencyError, CoherencyScorer};
use crate::corpus::{FacetSet, Query};
use crate::metrics::{EmbeddingProvider, MetricError};

const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

fn client(timeout: Duration) -> reqwest::blocking::Client {
    reqwest::blocking::Client::builder()
        .timeout(timeout)
        .build()
        .expect("http client builds")
}

fn endpoint(base: &str, path: &str) -> String {
    format!("{}/{path}", base.trim_end_matches('/'))
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    tokens: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
}

/// Embedding provider backed by an HTTP service. Vectors are L2-normalized
/// on receipt and cached per token, so a token is fetched at most once.
pub struct HttpEmbeddingProvider {
    base_url: String,
    client: reqwest::blocking::Client,
    dimension: Mutex<Option<usize>>,
    cache: Mutex<HashMap<String, Vec<f64>>>,
}

impl HttpEmbeddingProvider {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self::with_timeout(base_url, DEFAULT_TIMEOUT)
    }

    pub fn with_timeout(base_url: impl Into<String>, timeout: Duration) -> Self {
        Self {
            base_url: base_url.into(),
            client: client(timeout),
            dimension: Mutex::new(None),
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn fetch(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, MetricError> {
        let failure = |e: String| MetricError::ProviderFailure(format!("{}: {e}", self.base_url));
        let response = self
            .client
            .post(endpoint(&self.base_url, "embed"))
            .json(&EmbedRequest { tokens })
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| failure(e.to_string()))?;
        let body: EmbedResponse = response.json().map_err(|e| failure(e.to_string()))?;
        if body.vectors.len() != tokens.len() {
            return Err(failure(format!(
                "expected {} vectors, got {}",
                tokens.len(),
                body.vectors.len()
            )));
        }
        let mut dimension = self.dimension.lock().expect("dimension lock");
        let mut out = Vec::with_capacity(body.vectors.len());
        for mut v in body.vectors {
            let expected = *dimension.get_or_insert(v.len());
            if v.is_empty() || v.len() != expected {
                return Err(failure(format!("vector of length {} (expected {expected})", v.len())));
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !norm.is_finite() || norm == 0.0 {
                return Err(failure("zero or non-finite vector".into()));
            }
            v.iter_mut().for_each(|x| *x /= norm);
            out.push(v);
        }
        Ok(out)
    }
}

impl EmbeddingProvider for HttpEmbeddingProvider {
    /// Zero until the first successful response reveals it.
    fn dimension(&self) -> usize {
        self.dimension.lock().expect("dimension lock").unwrap_or(0)
    }

    fn embed(&self, tokens: &[String]) -> Result<Vec<Vec<f64>>, MetricError> {
        if tokens.iter().any(|t| t.is_empty()) {
            return Err(MetricError::EmptyToken);
        }
        let missing: Vec<String> = {
            let cache = self.cache.lock().expect("cache lock");
            let mut seen = std::collections::HashSet::new();
            tokens
                .iter()
                .filter(|t| !cache.contains_key(*t) && seen.insert(t.as_str()))
                .cloned()
                .collect()
        };
        if !missing.is_empty() {
            let vectors = self.fetch(&missing)?;
            let mut cache = self.cache.lock().expect("cache lock");
            for (t, v) in missing.into_iter().zip(vectors) {
                cache.insert(t, v);
            }
        }
        let cache = self.cache.lock().expect("cache lock");
        Ok(tokens.iter().map(|t| cache[t].clone()).collect())
    }

    fn name(&self) -> String {
        format!("http:{}", self.base_url)
    }
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    query: &'a str,
    facets: Vec<&'a str>,
}

#[derive(Deserialize)]
struct ScoreResponse {
    s: f64,
}

/// Coherency scorer delegating to an external model over HTTP.
pub struct ExternalScorer {
    base_url: String,
    client: reqwest::blocking::Client,
}

impl ExternalScorer {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self { base_url: base_url.into(), client: client(DEFAULT_TIMEOUT) }
    }
}

impl CoherencyScorer for ExternalScorer {
    fn score(&self, query: &Query, facets: &FacetSet) -> Result<f64, CoherencyError> {
        let failure = |e: String| CoherencyError::Scorer(format!("{}: {e}", self.base_url));
        let body: ScoreResponse = self
            .client
            .post(endpoint(&self.base_url, "score"))
            .json(&ScoreRequest {
                query: query.text(),
                facets: facets.iter().map(|f| f.raw()).collect(),
            })
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(|e| failure(e.to_string()))?;
        if !(0.0..=1.0).contains(&body.s) {
            return Err(failure(format!("score {} outside [0, 1]", body.s)));
        }
        Ok(body.s)
    }
}
