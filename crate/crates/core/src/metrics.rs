use serde::{Deserialize, Serialize};

use crate::cipher::{CipherLabel, NUM_CLASSES};
use crate::corpus::LabeledRecord;
use crate::error::{Error, Result};
use crate::model::{encode_records, predict, Classifier};
use crate::tokenizer::Tokenizer;

/// Counts indexed `[true][predicted]`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (CipherLabel, CipherLabel)>,
    {
        let mut m = ConfusionMatrix::default();
        for (truth, predicted) in pairs {
            m.record(truth, predicted);
        }
        m
    }

    pub fn record(&mut self, truth: CipherLabel, predicted: CipherLabel) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    pub fn true_positives(&self, class: CipherLabel) -> u64 {
        let c = class.index();
        self.counts[c][c]
    }

    pub fn false_negatives(&self, class: CipherLabel) -> u64 {
        let c = class.index();
        self.counts[c].iter().sum::<u64>() - self.counts[c][c]
    }

    pub fn false_positives(&self, class: CipherLabel) -> u64 {
        let c = class.index();
        (0..NUM_CLASSES).map(|t| self.counts[t][c]).sum::<u64>() - self.counts[c][c]
    }

    pub fn true_negatives(&self, class: CipherLabel) -> u64 {
        self.total() - self.true_positives(class) - self.false_negatives(class) - self.false_positives(class)
    }

    /// Share of records of `class` predicted as `class` (0 if none exist).
    pub fn class_accuracy(&self, class: CipherLabel) -> f64 {
        let row: u64 = self.counts[class.index()].iter().sum();
        if row == 0 {
            0.0
        } else {
            self.true_positives(class) as f64 / row as f64
        }
    }

    /// Top-1 accuracy over all records (0 when empty).
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.correct() as f64 / total as f64
        }
    }
}

/// One line of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: String,
    /// `S` (subword), `W` (word) or `C` (character).
    pub level: String,
    pub per_class: [f64; NUM_CLASSES],
    pub acc: f64,
}

impl ResultRow {
    pub fn from_confusion(model: impl Into<String>, level: impl Into<String>, m: &ConfusionMatrix) -> Self {
        ResultRow {
            model: model.into(),
            level: level.into(),
            per_class: CipherLabel::ALL.map(|c| m.class_accuracy(c)),
            acc: m.accuracy(),
        }
    }
}

/// Eval-mode top-1 predictions on `records`, summarized as a confusion
/// matrix and a result row named `model_name`.
pub fn evaluate(
    model: &Classifier,
    tokenizer: &Tokenizer,
    records: &[LabeledRecord],
    model_name: &str,
) -> Result<(ConfusionMatrix, ResultRow)> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate on an empty dataset".into()));
    }
    if tokenizer.vocab_size() != model.config.vocab_size {
        return Err(Error::Shape(format!(
            "tokenizer has {} tokens but the model expects {}",
            tokenizer.vocab_size(),
            model.config.vocab_size
        )));
    }
    let encoded = encode_records(tokenizer, records, model.config.max_len);
    let predicted = predict(model, &encoded)?;
    let matrix = ConfusionMatrix::from_pairs(records.iter().map(|r| r.label).zip(predicted));
    let row = ResultRow::from_confusion(model_name, tokenizer.kind().level().to_string(), &matrix);
    Ok((matrix, row))
}
