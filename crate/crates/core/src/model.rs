//! The trainable model and its local-training / evaluation / aggregation
//! primitives.
//!
//! The model is multinomial logistic regression over the synthetic
//! features: a weight row per class plus a bias per class, flattened
//! row-major into one parameter vector. The orchestration strategies only
//! consume (accuracy, training-time) signals, so this stands in for a
//! deep network at a fraction of the cost.

use std::io::{Read, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::client::ClientId;
use crate::dataset::{ClientShard, Dataset};

const CHECKPOINT_MAGIC: [u8; 4] = *b"FDCT";
const CHECKPOINT_VERSION: u32 = 1;
const INIT_WEIGHT_BOUND: f64 = 0.05;

/// Where a parameter vector came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Global,
    ClientUpdate(ClientId),
}

/// Flat parameter vector plus metadata.
#[derive(Debug, Clone)]
pub struct ModelState {
    /// `num_classes * num_features` weights (row-major by class), then
    /// `num_classes` biases.
    pub params: Vec<f64>,
    pub round_produced: u32,
    pub provenance: Provenance,
    pub num_classes: usize,
    pub num_features: usize,
}

impl ModelState {
    pub fn param_len(num_classes: usize, num_features: usize) -> usize {
        num_classes * num_features + num_classes
    }

    fn weight_row(&self, class: usize) -> &[f64] {
        let start = class * self.num_features;
        &self.params[start..start + self.num_features]
    }

    fn bias(&self, class: usize) -> f64 {
        self.params[self.num_classes * self.num_features + class]
    }

    /// Class scores (logits) for one sample.
    pub fn scores(&self, features: &[f64]) -> Vec<f64> {
        (0..self.num_classes)
            .map(|k| {
                let dot: f64 = self
                    .weight_row(k)
                    .iter()
                    .zip(features)
                    .map(|(w, x)| w * x)
                    .sum();
                dot + self.bias(k)
            })
            .collect()
    }

    /// Argmax prediction; ties break toward the lowest class index.
    pub fn predict(&self, features: &[f64]) -> u32 {
        let scores = self.scores(features);
        let mut best = 0usize;
        for (k, &s) in scores.iter().enumerate().skip(1) {
            if s > scores[best] {
                best = k;
            }
        }
        best as u32
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("non-finite loss or gradient during local training (learning rate too high?)")]
    NonFinite,
    #[error("cannot aggregate an empty update set")]
    EmptyAggregation,
    #[error("parameter vectors have mismatched lengths")]
    ShapeMismatch,
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
}

/// Initialize weights i.i.d. uniform in `[-0.05, 0.05]`, biases zero.
pub fn init_model(num_classes: usize, num_features: usize, rng: &mut ChaCha8Rng) -> ModelState {
    assert!(num_classes > 0 && num_features > 0);
    let mut params = Vec::with_capacity(ModelState::param_len(num_classes, num_features));
    for _ in 0..num_classes * num_features {
        params.push(rng.gen_range(-INIT_WEIGHT_BOUND..=INIT_WEIGHT_BOUND));
    }
    params.extend(std::iter::repeat_n(0.0, num_classes));
    ModelState {
        params,
        round_produced: 0,
        provenance: Provenance::Global,
        num_classes,
        num_features,
    }
}

/// Stable softmax of a score vector.
fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// Mean cross-entropy loss and its gradient over a batch of samples.
///
/// Returns `(loss, gradient)` with the gradient in the same layout as the
/// parameter vector.
fn batch_loss_gradient(model: &ModelState, dataset: &Dataset, batch: &[u32]) -> (f64, Vec<f64>) {
    assert!(!batch.is_empty());
    let mut grad = vec![0.0; model.params.len()];
    let mut loss = 0.0;
    let bias_base = model.num_classes * model.num_features;
    for &sample in batch {
        let x = dataset.features_of(sample);
        let y = dataset.label_of(sample) as usize;
        let probs = softmax(&model.scores(x));
        loss -= probs[y].max(f64::MIN_POSITIVE).ln();
        for k in 0..model.num_classes {
            let indicator = if k == y { 1.0 } else { 0.0 };
            let delta = probs[k] - indicator;
            let row = k * model.num_features;
            for (j, &xj) in x.iter().enumerate() {
                grad[row + j] += delta * xj;
            }
            grad[bias_base + k] += delta;
        }
    }
    let scale = 1.0 / batch.len() as f64;
    for g in &mut grad {
        *g *= scale;
    }
    (loss * scale, grad)
}

/// Mean cross-entropy loss over a batch. Exposed for gradient checking.
pub fn batch_loss(model: &ModelState, dataset: &Dataset, batch: &[u32]) -> f64 {
    batch_loss_gradient(model, dataset, batch).0
}

/// Gradient of [`batch_loss`] with respect to the parameters.
pub fn batch_gradient(model: &ModelState, dataset: &Dataset, batch: &[u32]) -> Vec<f64> {
    batch_loss_gradient(model, dataset, batch).1
}

/// Run `epochs` of mini-batch SGD on the shard, starting from `global`.
///
/// The batch order is drawn from `rng` (one shuffle per epoch), so the
/// caller keys the generator by (client, round). The global model is not
/// mutated.
pub fn train_client(
    global: &ModelState,
    dataset: &Dataset,
    shard: &ClientShard,
    epochs: u32,
    batch_size: u32,
    learning_rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ModelState, ModelError> {
    assert!(!shard.samples.is_empty(), "shard must be non-empty");
    assert!(batch_size > 0);
    let mut model = ModelState {
        params: global.params.clone(),
        round_produced: global.round_produced,
        provenance: Provenance::ClientUpdate(shard.client_id),
        num_classes: global.num_classes,
        num_features: global.num_features,
    };
    for _ in 0..epochs {
        // Each epoch shuffles from the shard's canonical order, so E
        // epochs behave exactly like E single-epoch calls on a chained
        // generator.
        use rand::seq::SliceRandom;
        let mut order = shard.samples.clone();
        order.shuffle(rng);
        for batch in order.chunks(batch_size as usize) {
            let (loss, grad) = batch_loss_gradient(&model, dataset, batch);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(ModelError::NonFinite);
            }
            for (p, g) in model.params.iter_mut().zip(&grad) {
                *p -= learning_rate * g;
            }
        }
    }
    Ok(model)
}

/// Sample-size-weighted average of client updates.
pub fn aggregate(updates: &[(ModelState, u64)]) -> Result<ModelState, ModelError> {
    let (first, _) = updates.first().ok_or(ModelError::EmptyAggregation)?;
    if updates.iter().any(|(m, _)| m.params.len() != first.params.len()) {
        return Err(ModelError::ShapeMismatch);
    }
    let total: u64 = updates.iter().map(|(_, s)| s).sum();
    if total == 0 {
        return Err(ModelError::EmptyAggregation);
    }
    let mut params = vec![0.0; first.params.len()];
    for (model, samples) in updates {
        let weight = *samples as f64 / total as f64;
        for (acc, p) in params.iter_mut().zip(&model.params) {
            *acc += weight * p;
        }
    }
    Ok(ModelState {
        params,
        round_produced: first.round_produced,
        provenance: Provenance::Global,
        num_classes: first.num_classes,
        num_features: first.num_features,
    })
}

/// Fraction of argmax-correct predictions over the given samples.
pub fn evaluate(model: &ModelState, dataset: &Dataset, samples: &[u32]) -> f64 {
    assert!(!samples.is_empty(), "evaluation split must be non-empty");
    let correct = samples
        .iter()
        .filter(|&&i| model.predict(dataset.features_of(i)) == dataset.label_of(i))
        .count();
    correct as f64 / samples.len() as f64
}

/// Staleness-weighted asynchronous merge:
/// `alpha = alpha_base * (staleness + 1)^-0.5`, result
/// `(1 - alpha) * global + alpha * update`.
pub fn fedasync_merge(
    global: &ModelState,
    update: &ModelState,
    staleness: u64,
    alpha_base: f64,
) -> ModelState {
    assert_eq!(global.params.len(), update.params.len());
    assert!(alpha_base > 0.0 && alpha_base <= 1.0);
    let alpha = alpha_base / ((staleness + 1) as f64).sqrt();
    let params = global
        .params
        .iter()
        .zip(&update.params)
        .map(|(g, u)| (1.0 - alpha) * g + alpha * u)
        .collect();
    ModelState {
        params,
        round_produced: update.round_produced,
        provenance: Provenance::Global,
        num_classes: global.num_classes,
        num_features: global.num_features,
    }
}

/// Write a checkpoint: 16-byte header (magic `FDCT`, version, class and
/// feature counts as little-endian u32) followed by the parameters as
/// little-endian f64.
pub fn write_checkpoint<W: Write>(model: &ModelState, mut writer: W) -> Result<(), ModelError> {
    writer.write_all(&CHECKPOINT_MAGIC)?;
    writer.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    writer.write_all(&(model.num_classes as u32).to_le_bytes())?;
    writer.write_all(&(model.num_features as u32).to_le_bytes())?;
    for p in &model.params {
        writer.write_all(&p.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut reader: R) -> Result<ModelState, ModelError> {
    let mut header = [0u8; 16];
    reader.read_exact(&mut header)?;
    if header[0..4] != CHECKPOINT_MAGIC {
        return Err(ModelError::BadCheckpoint("wrong magic".into()));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::BadCheckpoint(format!("unsupported version {version}")));
    }
    let num_classes = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let num_features = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    if num_classes == 0 || num_features == 0 {
        return Err(ModelError::BadCheckpoint("degenerate shape".into()));
    }
    let len = ModelState::param_len(num_classes, num_features);
    let mut params = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        reader.read_exact(&mut buf)?;
        params.push(f64::from_le_bytes(buf));
    }
    Ok(ModelState {
        params,
        round_produced: 0,
        provenance: Provenance::Global,
        num_classes,
        num_features,
    })
}
