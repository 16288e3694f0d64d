use serde::{Deserialize, Serialize};

use super::features::{extract_features, FEATURE_NAMES, FEATURE_SCHEMA_VERSION};
use super::model::{CoherencyModel, TrainingMetadata};
use super::{Coherency, CoherencyError, LabeledRecord};
use crate::metrics::EmbeddingProvider;

/// Full-batch gradient descent settings.
///
/// An epoch is `steps_per_epoch` full-batch gradient steps followed by one
/// validation-loss evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub patience: usize,
    pub l2: f64,
    pub seed: u64,
    pub steps_per_epoch: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 4,
            patience: 2,
            l2: 1e-4,
            seed: 13,
            steps_per_epoch: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: Option<f64>,
}

/// Per-feature z-scoring with training-set statistics. Population standard
/// deviation; constant features get std 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let means: Vec<f64> = (0..dim)
            .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect();
        let stds = (0..dim)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / n;
                let sd = var.sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { means, stds }
    }

    pub fn identity(dim: usize) -> Self {
        Self { means: vec![0.0; dim], stds: vec![1.0; dim] }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Mean cross-entropy plus `l2 * ||w||^2` (bias unpenalized), and its
/// gradient with respect to the weights and the bias.
pub fn loss_and_gradient(
    weights: &[f64],
    bias: f64,
    rows: &[Vec<f64>],
    targets: &[f64],
    l2: f64,
) -> (f64, Vec<f64>, f64) {
    let n = rows.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for (x, &y) in rows.iter().zip(targets) {
        let z = bias + weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        loss += softplus(z) - y * z;
        let residual = sigmoid(z) - y;
        for (g, v) in grad.iter_mut().zip(x) {
            *g += residual * v;
        }
        grad_b += residual;
    }
    loss /= n;
    grad_b /= n;
    for (g, w) in grad.iter_mut().zip(weights) {
        *g = *g / n + 2.0 * l2 * w;
    }
    loss += l2 * weights.iter().map(|w| w * w).sum::<f64>();
    (loss, grad, grad_b)
}

struct Fitted {
    weights: Vec<f64>,
    bias: f64,
    trace: Vec<LossPoint>,
}

fn fit(
    train_x: &[Vec<f64>],
    train_y: &[f64],
    val_x: &[Vec<f64>],
    val_y: &[f64],
    config: &TrainConfig,
) -> Result<Fitted, CoherencyError> {
    let dim = train_x.first().map_or(0, Vec::len);
    let mut weights = vec![0.0; dim];
    let mut bias = 0.0;
    let mut trace = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut stale = 0;

    for epoch in 1..=config.epochs {
        for _ in 0..config.steps_per_epoch {
            let (_, grad, grad_b) = loss_and_gradient(&weights, bias, train_x, train_y, config.l2);
            for (w, g) in weights.iter_mut().zip(&grad) {
                *w -= config.learning_rate * g;
            }
            bias -= config.learning_rate * grad_b;
        }
        let (train_loss, _, _) = loss_and_gradient(&weights, bias, train_x, train_y, config.l2);
        if !train_loss.is_finite() || weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
            return Err(CoherencyError::NonFiniteLoss(epoch));
        }
        let validation_loss = (!val_x.is_empty())
            .then(|| loss_and_gradient(&weights, bias, val_x, val_y, 0.0).0);
        trace.push(LossPoint { epoch, train_loss, validation_loss });

        if let Some(vl) = validation_loss {
            if !vl.is_finite() {
                return Err(CoherencyError::NonFiniteLoss(epoch));
            }
            match &best {
                Some((bl, _, _)) if vl >= *bl => {
                    stale += 1;
                    if stale >= config.patience {
                        break;
                    }
                }
                _ => {
                    best = Some((vl, weights.clone(), bias));
                    stale = 0;
                }
            }
        }
    }

    if let Some((_, w, b)) = best {
        weights = w;
        bias = b;
    }
    Ok(Fitted { weights, bias, trace })
}

/// Trains the logistic coherency scorer.
///
/// Features are standardized with training statistics; weights start at
/// zero. With validation records, training stops once validation loss has
/// not improved for `patience` consecutive epochs, and the weights from the
/// best validation epoch are kept.
pub fn train(
    train_records: &[LabeledRecord],
    validation_records: &[LabeledRecord],
    config: &TrainConfig,
    provider: &dyn EmbeddingProvider,
) -> Result<CoherencyModel, CoherencyError> {
    for r in train_records.iter().chain(validation_records) {
        r.ensure_not_predicted()?;
    }
    let has = |c: Coherency| train_records.iter().any(|r| r.label.value == c);
    if !has(Coherency::Coherent) || !has(Coherency::Incoherent) {
        return Err(CoherencyError::SingleClassTraining);
    }

    let featurize = |records: &[LabeledRecord]| -> Result<(Vec<Vec<f64>>, Vec<f64>), CoherencyError> {
        let mut xs = Vec::with_capacity(records.len());
        let mut ys = Vec::with_capacity(records.len());
        for r in records {
            xs.push(extract_features(&r.facets, &r.query, provider)?.values.to_vec());
            ys.push(r.label.value.as_target());
        }
        Ok((xs, ys))
    };
    let (raw_train, train_y) = featurize(train_records)?;
    let (raw_val, val_y) = featurize(validation_records)?;

    let standardizer = Standardizer::fit(&raw_train);
    let train_x: Vec<Vec<f64>> = raw_train.iter().map(|r| standardizer.apply(r)).collect();
    let val_x: Vec<Vec<f64>> = raw_val.iter().map(|r| standardizer.apply(r)).collect();

    let fitted = fit(&train_x, &train_y, &val_x, &val_y, config)?;
    Ok(CoherencyModel {
        schema_version: FEATURE_SCHEMA_VERSION,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        standardizer,
        weights: fitted.weights,
        bias: fitted.bias,
        metadata: TrainingMetadata {
            seed: config.seed,
            epochs: config.epochs,
            epochs_run: fitted.trace.len(),
            steps_per_epoch: config.steps_per_epoch,
            patience: config.patience,
            learning_rate: config.learning_rate,
            l2: config.l2,
            train_size: train_records.len(),
            validation_size: validation_records.len(),
            provider: provider.name(),
            loss_trace: fitted.trace,
        },
    })
}
