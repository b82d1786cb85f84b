use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::network::argmax_rows;
use super::{Adam, Classifier, Params, Sequence};
use crate::cipher::CipherLabel;
use crate::corpus::LabeledRecord;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::tokenizer::Tokenizer;

/// Batch size used for evaluation-mode forward passes.
pub const EVAL_BATCH: usize = 256;

const SHUFFLE_STREAM: u64 = 1;
const DROPOUT_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            lr: 0.001,
            batch_size: 1024,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 || !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epochs, batch_size and lr must be positive (got {}, {}, {})",
                self.epochs, self.batch_size, self.lr
            )));
        }
        Ok(())
    }
}

/// A tokenized record: `ids` is truncated to the model's `max_len` and
/// carries no padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedRecord {
    pub ids: Vec<u32>,
    pub label: CipherLabel,
}

impl EncodedRecord {
    pub fn sequence(&self) -> Sequence<'_> {
        Sequence::unpadded(&self.ids)
    }
}

pub fn encode_records(tokenizer: &Tokenizer, records: &[LabeledRecord], max_len: usize) -> Vec<EncodedRecord> {
    records
        .iter()
        .map(|r| {
            let mut ids = tokenizer.tokenize(&r.text);
            ids.truncate(max_len);
            EncodedRecord { ids, label: r.label }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: Params,
    /// 1-based epoch the snapshot was taken after.
    pub epoch: usize,
    pub valid_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub valid_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub checkpoint: Checkpoint,
    pub history: Vec<EpochStats>,
}

/// Class probabilities for every record, in input order (eval mode).
pub fn predict_probabilities(model: &Classifier, records: &[EncodedRecord]) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((records.len(), model.config.num_classes));
    for (chunk_idx, chunk) in records.chunks(EVAL_BATCH).enumerate() {
        let batch: Vec<Sequence> = chunk.iter().map(EncodedRecord::sequence).collect();
        let probs = model.forward(&batch, None)?;
        let start = chunk_idx * EVAL_BATCH;
        out.slice_mut(ndarray::s![start..start + chunk.len(), ..]).assign(&probs);
    }
    Ok(out)
}

pub fn predict(model: &Classifier, records: &[EncodedRecord]) -> Result<Vec<CipherLabel>> {
    let probs = predict_probabilities(model, records)?;
    Ok(argmax_rows(&probs)
        .into_iter()
        .map(|i| CipherLabel::from_index(i).expect("class index"))
        .collect())
}

/// Fraction of records whose most probable class is the true label.
pub fn accuracy(model: &Classifier, records: &[EncodedRecord]) -> Result<f64> {
    if records.is_empty() {
        return Ok(0.0);
    }
    let predicted = predict(model, records)?;
    let hits = predicted.iter().zip(records).filter(|(p, r)| **p == r.label).count();
    Ok(hits as f64 / records.len() as f64)
}

/// Trains with Adam on shuffled mini-batches and leaves `model` holding the
/// parameters of the epoch with the strictly highest validation accuracy.
pub fn train(
    model: &mut Classifier,
    train_set: &[EncodedRecord],
    valid_set: &[EncodedRecord],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_set.is_empty() || valid_set.is_empty() {
        return Err(Error::InvalidArgument("training and validation sets must be non-empty".into()));
    }
    let mut shuffle_rng = seeded(derive_seed(cfg.seed, SHUFFLE_STREAM));
    let mut dropout_rng = seeded(derive_seed(cfg.seed, DROPOUT_STREAM));
    let mut adam = Adam::new(&model.params);
    let train_embedding = model.config.embedding_trainable();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut best: Option<Checkpoint> = None;
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        let mut hits = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<Sequence> = chunk.iter().map(|&i| train_set[i].sequence()).collect();
            let labels: Vec<CipherLabel> = chunk.iter().map(|&i| train_set[i].label).collect();
            let masks = model.sample_dropout(batch.len(), &mut dropout_rng);
            let pass = model.forward_train(&batch, Some(&masks))?;
            hits += argmax_rows(&pass.probs)
                .iter()
                .zip(&labels)
                .filter(|(p, l)| **p == l.index())
                .count();
            let (loss, grads) = model.backward(pass, &labels)?;
            loss_sum += loss * chunk.len() as f64;
            adam.step(&mut model.params, &grads, cfg.lr, train_embedding)?;
        }
        let valid_accuracy = accuracy(model, valid_set)?;
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: hits as f64 / train_set.len() as f64,
            valid_accuracy,
        });
        if best.as_ref().is_none_or(|b| valid_accuracy > b.valid_accuracy) {
            best = Some(Checkpoint {
                params: model.params.clone(),
                epoch,
                valid_accuracy,
            });
        }
    }
    let checkpoint = best.expect("at least one epoch");
    model.params = checkpoint.params.clone();
    Ok(TrainOutcome { checkpoint, history })
}
