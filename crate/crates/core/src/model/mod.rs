//! Recurrent cipher classifier: embedding → GRU/LSTM → two ReLU layers with
//! dropout → 6-way softmax, trained with exact backpropagation through time
//! and Adam.

mod adam;
mod io;
mod network;
mod params;
mod train;

use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use io::{decode_model, encode_model, load_model, save_model, MODEL_FORMAT_VERSION};
pub use network::{argmax_rows, cross_entropy, DropoutMasks, ForwardPass, Sequence};
pub use params::{Params, TENSOR_NAMES};
pub use train::{
    accuracy, encode_records, predict, predict_probabilities, train, Checkpoint, EncodedRecord, EpochStats,
    TrainConfig, TrainOutcome, EVAL_BATCH,
};

use crate::cipher::NUM_CLASSES;
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellType {
    Gru,
    Lstm,
}

impl CellType {
    /// Number of gate blocks stacked in the input and recurrent kernels.
    pub fn gates(self) -> usize {
        match self {
            CellType::Gru => 3,
            CellType::Lstm => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            CellType::Gru => "GRU",
            CellType::Lstm => "LSTM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbeddingMode {
    /// Randomly initialised and trained with the rest of the model.
    Learned,
    /// Loaded from a file and never updated.
    FrozenPretrained,
    /// Initialised from GloVe vectors and trained further.
    GloveInitialized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub cell: CellType,
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub head_dims: [usize; 2],
    pub dropout: f64,
    pub num_classes: usize,
    pub max_len: usize,
    pub embedding_mode: EmbeddingMode,
}

impl ModelConfig {
    pub fn new(cell: CellType, vocab_size: usize, max_len: usize) -> Self {
        ModelConfig {
            cell,
            vocab_size,
            embed_dim: 300,
            hidden_dim: 256,
            head_dims: [512, 512],
            dropout: 0.5,
            num_classes: NUM_CLASSES,
            max_len,
            embedding_mode: EmbeddingMode::Learned,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.num_classes != NUM_CLASSES {
            return bad(format!("num_classes must be {NUM_CLASSES}"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        let dims = [
            ("vocab_size", self.vocab_size),
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("head_dims[0]", self.head_dims[0]),
            ("head_dims[1]", self.head_dims[1]),
            ("max_len", self.max_len),
        ];
        for (name, v) in dims {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn embedding_trainable(&self) -> bool {
        self.embedding_mode != EmbeddingMode::FrozenPretrained
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub config: ModelConfig,
    pub params: Params,
}

impl Classifier {
    /// Seeded Glorot-uniform initialisation with a learned embedding.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = Params::init(&config, &mut seeded(seed));
        Ok(Classifier { config, params })
    }

    /// Uses `embedding` (PAD row forced to zero) instead of a random table.
    pub fn with_embedding(config: ModelConfig, embedding: &EmbeddingMatrix, seed: u64) -> Result<Self> {
        let mut model = Classifier::new(config, seed)?;
        if embedding.vectors.dim() != model.params.embedding.dim() {
            return Err(Error::Shape(format!(
                "embedding is {:?}, model expects {:?}",
                embedding.vectors.dim(),
                model.params.embedding.dim()
            )));
        }
        model.params.embedding.assign(&embedding.vectors);
        model.params.embedding.row_mut(crate::tokenizer::PAD_ID as usize).fill(0.0);
        Ok(model)
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_parameters()
    }
}
