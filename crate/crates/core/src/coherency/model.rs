use serde::{Deserialize, Serialize};

use super::features::{extract_features, FEATURE_NAMES, FEATURE_SCHEMA_VERSION};
use super::logistic::{sigmoid, LossPoint, Standardizer};
use super::{decide, Coherency, CoherencyError};
use crate::corpus::{FacetSet, Query};
use crate::metrics::EmbeddingProvider;

const MODEL_FORMAT: &str = "facetkit-coherency-model";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub epochs: usize,
    pub epochs_run: usize,
    pub steps_per_epoch: usize,
    pub patience: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub train_size: usize,
    pub validation_size: usize,
    pub provider: String,
    pub loss_trace: Vec<LossPoint>,
}

/// Standardization statistics and logistic weights of the coherency scorer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherencyModel {
    pub schema_version: u32,
    pub feature_names: Vec<String>,
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub metadata: TrainingMetadata,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    #[serde(flatten)]
    model: CoherencyModel,
}

impl CoherencyModel {
    /// All-zero weights over the current feature schema: scores every set 0.5.
    pub fn zero() -> Self {
        Self {
            schema_version: FEATURE_SCHEMA_VERSION,
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            standardizer: Standardizer::identity(FEATURE_NAMES.len()),
            weights: vec![0.0; FEATURE_NAMES.len()],
            bias: 0.0,
            metadata: TrainingMetadata {
                seed: 0,
                epochs: 0,
                epochs_run: 0,
                steps_per_epoch: 0,
                patience: 0,
                learning_rate: 0.0,
                l2: 0.0,
                train_size: 0,
                validation_size: 0,
                provider: String::new(),
                loss_trace: Vec::new(),
            },
        }
    }

    pub fn check_schema(&self) -> Result<(), CoherencyError> {
        if self.schema_version != FEATURE_SCHEMA_VERSION {
            return Err(CoherencyError::SchemaMismatch(format!(
                "model schema v{}, extractor v{FEATURE_SCHEMA_VERSION}",
                self.schema_version
            )));
        }
        let names_match = self.feature_names.len() == FEATURE_NAMES.len()
            && self.feature_names.iter().zip(FEATURE_NAMES).all(|(a, b)| a == b);
        let dim = FEATURE_NAMES.len();
        if !names_match
            || self.weights.len() != dim
            || self.standardizer.means.len() != dim
            || self.standardizer.stds.len() != dim
        {
            return Err(CoherencyError::SchemaMismatch(
                "feature names or parameter dimensions differ from the extractor".into(),
            ));
        }
        if self.standardizer.stds.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return Err(CoherencyError::SchemaMismatch("non-positive standard deviation".into()));
        }
        Ok(())
    }

    /// Score for an already-extracted raw feature row.
    pub fn score_features(&self, raw: &[f64]) -> f64 {
        let x = self.standardizer.apply(raw);
        let z = self.bias + self.weights.iter().zip(&x).map(|(w, v)| w * v).sum::<f64>();
        sigmoid(z)
    }

    /// Versioned JSON text document.
    pub fn to_text(&self) -> String {
        let file = ModelFile { format: MODEL_FORMAT.into(), model: self.clone() };
        serde_json::to_string_pretty(&file).expect("model serializes") + "\n"
    }

    pub fn from_text(text: &str) -> Result<Self, CoherencyError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| CoherencyError::Format(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(CoherencyError::Format(format!("unexpected format tag {:?}", file.format)));
        }
        file.model.check_schema()?;
        Ok(file.model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub score: f64,
    pub label: Coherency,
}

impl Prediction {
    pub fn from_score(score: f64) -> Self {
        Self { score, label: decide(score) }
    }
}

/// s = logistic(w · standardize(features) + b), coherent iff s > 0.5.
pub fn predict(
    model: &CoherencyModel,
    facets: &FacetSet,
    query: &Query,
    provider: &dyn EmbeddingProvider,
) -> Result<Prediction, CoherencyError> {
    model.check_schema()?;
    let features = extract_features(facets, query, provider)?;
    Ok(Prediction::from_score(model.score_features(&features.values)))
}

/// Anything that maps a facet set to a coherency score in [0, 1].
pub trait CoherencyScorer: Send + Sync {
    fn score(&self, query: &Query, facets: &FacetSet) -> Result<f64, CoherencyError>;

    fn predict(&self, query: &Query, facets: &FacetSet) -> Result<Prediction, CoherencyError> {
        self.score(query, facets).map(Prediction::from_score)
    }
}

/// A trained [`CoherencyModel`] paired with the embedding provider its
/// features use.
pub struct LocalScorer<'a> {
    pub model: &'a CoherencyModel,
    pub provider: &'a dyn EmbeddingProvider,
}

impl<'a> LocalScorer<'a> {
    pub fn new(model: &'a CoherencyModel, provider: &'a dyn EmbeddingProvider) -> Self {
        Self { model, provider }
    }
}

impl CoherencyScorer for LocalScorer<'_> {
    fn score(&self, query: &Query, facets: &FacetSet) -> Result<f64, CoherencyError> {
        predict(self.model, facets, query, self.provider).map(|p| p.score)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::HashedTrigramEmbedder;

    fn set(items: &[&str]) -> FacetSet {
        FacetSet::from_texts(items.iter().copied()).unwrap()
    }

    #[test]
    fn zero_model_is_incoherent_at_boundary() {
        let p = predict(
            &CoherencyModel::zero(),
            &set(&["coupe", "hatchback"]),
            &Query::new("1982 mustang").unwrap(),
            &HashedTrigramEmbedder::default(),
        )
        .unwrap();
        assert_eq!(p.score, 0.5);
        assert_eq!(p.label, Coherency::Incoherent);
    }

    #[test]
    fn schema_mismatch() {
        let mut m = CoherencyModel::zero();
        m.schema_version = 99;
        let err = predict(&m, &set(&["a"]), &Query::new("q").unwrap(), &HashedTrigramEmbedder::default());
        assert!(matches!(err, Err(CoherencyError::SchemaMismatch(_))));

        let mut m = CoherencyModel::zero();
        m.feature_names.swap(0, 1);
        assert!(matches!(m.check_schema(), Err(CoherencyError::SchemaMismatch(_))));
    }

    #[test]
    fn duplicate_never_raises_score_with_negative_weight() {
        let mut m = CoherencyModel::zero();
        m.weights[0] = -2.0; // has_duplicate
        m.weights[6] = -0.5; // mean_jaccard
        m.weights[3] = 0.0;
        let provider = HashedTrigramEmbedder::default();
        let q = Query::new("1982 mustang").unwrap();
        let before = predict(&m, &set(&["coupe", "hatchback"]), &q, &provider).unwrap();
        let after = predict(&m, &set(&["coupe", "hatchback", "coupe"]), &q, &provider).unwrap();
        assert!(after.score <= before.score);
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let mut m = CoherencyModel::zero();
        m.weights = vec![0.1, -1.0 / 3.0, 2.5e-8, 7.0, -0.0, 1e300, 0.3, -0.7];
        m.bias = std::f64::consts::PI;
        m.standardizer.means[2] = 0.123_456_789_012_345_68;
        let back = CoherencyModel::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert!(CoherencyModel::from_text("{}").is_err());
        let wrong = m.to_text().replace(MODEL_FORMAT, "other");
        assert!(matches!(CoherencyModel::from_text(&wrong), Err(CoherencyError::Format(_))));
    }
}
