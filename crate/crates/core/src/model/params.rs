use ndarray::{Array1, Array2};
use rand::Rng;

use super::{CellType, ModelConfig};
use crate::rng::RandomSource;
use crate::tokenizer::PAD_ID;

/// Every trainable tensor of the classifier. Gradients use the same type.
///
/// Gate blocks are stacked along the columns of the kernels: `[z | r | n]`
/// for GRU and `[i | f | g | o]` for LSTM. `b_recurrent` is only used by
/// the GRU (it is empty for LSTM).
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub embedding: Array2<f64>,
    pub w_input: Array2<f64>,
    pub b_input: Array1<f64>,
    pub w_recurrent: Array2<f64>,
    pub b_recurrent: Array1<f64>,
    pub w_head1: Array2<f64>,
    pub b_head1: Array1<f64>,
    pub w_head2: Array2<f64>,
    pub b_head2: Array1<f64>,
    pub w_out: Array2<f64>,
    pub b_out: Array1<f64>,
}

/// Tensor names in serialization order.
pub const TENSOR_NAMES: [&str; 11] = [
    "embedding",
    "rnn.w_input",
    "rnn.b_input",
    "rnn.w_recurrent",
    "rnn.b_recurrent",
    "head.w1",
    "head.b1",
    "head.w2",
    "head.b2",
    "head.w_out",
    "head.b_out",
];

fn glorot(rows: usize, cols: usize, rng: &mut RandomSource) -> Array2<f64> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-limit..limit))
}

impl Params {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let gh = cfg.cell.gates() * cfg.hidden_dim;
        let [h1, h2] = cfg.head_dims;
        Params {
            embedding: Array2::zeros((cfg.vocab_size, cfg.embed_dim)),
            w_input: Array2::zeros((cfg.embed_dim, gh)),
            b_input: Array1::zeros(gh),
            w_recurrent: Array2::zeros((cfg.hidden_dim, gh)),
            b_recurrent: Array1::zeros(match cfg.cell {
                CellType::Gru => gh,
                CellType::Lstm => 0,
            }),
            w_head1: Array2::zeros((cfg.hidden_dim, h1)),
            b_head1: Array1::zeros(h1),
            w_head2: Array2::zeros((h1, h2)),
            b_head2: Array1::zeros(h2),
            w_out: Array2::zeros((h2, cfg.num_classes)),
            b_out: Array1::zeros(cfg.num_classes),
        }
    }

    pub(crate) fn init(cfg: &ModelConfig, rng: &mut RandomSource) -> Self {
        let mut p = Params::zeros(cfg);
        p.embedding = Array2::from_shape_fn((cfg.vocab_size, cfg.embed_dim), |_| rng.random_range(-0.05..0.05));
        p.embedding.row_mut(PAD_ID as usize).fill(0.0);
        let gh = cfg.cell.gates() * cfg.hidden_dim;
        p.w_input = glorot(cfg.embed_dim, gh, rng);
        p.w_recurrent = glorot(cfg.hidden_dim, gh, rng);
        if cfg.cell == CellType::Lstm {
            let h = cfg.hidden_dim;
            p.b_input.slice_mut(ndarray::s![h..2 * h]).fill(1.0);
        }
        let [h1, h2] = cfg.head_dims;
        p.w_head1 = glorot(cfg.hidden_dim, h1, rng);
        p.w_head2 = glorot(h1, h2, rng);
        p.w_out = glorot(h2, cfg.num_classes, rng);
        p
    }

    pub fn shapes(&self) -> Vec<Vec<usize>> {
        vec![
            self.embedding.shape().to_vec(),
            self.w_input.shape().to_vec(),
            self.b_input.shape().to_vec(),
            self.w_recurrent.shape().to_vec(),
            self.b_recurrent.shape().to_vec(),
            self.w_head1.shape().to_vec(),
            self.b_head1.shape().to_vec(),
            self.w_head2.shape().to_vec(),
            self.b_head2.shape().to_vec(),
            self.w_out.shape().to_vec(),
            self.b_out.shape().to_vec(),
        ]
    }

    /// Flat views of every tensor, in [`TENSOR_NAMES`] order.
    pub fn slices(&self) -> [&[f64]; 11] {
        [
            self.embedding.as_slice().expect("standard layout"),
            self.w_input.as_slice().expect("standard layout"),
            self.b_input.as_slice().expect("standard layout"),
            self.w_recurrent.as_slice().expect("standard layout"),
            self.b_recurrent.as_slice().expect("standard layout"),
            self.w_head1.as_slice().expect("standard layout"),
            self.b_head1.as_slice().expect("standard layout"),
            self.w_head2.as_slice().expect("standard layout"),
            self.b_head2.as_slice().expect("standard layout"),
            self.w_out.as_slice().expect("standard layout"),
            self.b_out.as_slice().expect("standard layout"),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f64]; 11] {
        [
            self.embedding.as_slice_mut().expect("standard layout"),
            self.w_input.as_slice_mut().expect("standard layout"),
            self.b_input.as_slice_mut().expect("standard layout"),
            self.w_recurrent.as_slice_mut().expect("standard layout"),
            self.b_recurrent.as_slice_mut().expect("standard layout"),
            self.w_head1.as_slice_mut().expect("standard layout"),
            self.b_head1.as_slice_mut().expect("standard layout"),
            self.w_head2.as_slice_mut().expect("standard layout"),
            self.b_head2.as_slice_mut().expect("standard layout"),
            self.w_out.as_slice_mut().expect("standard layout"),
            self.b_out.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn num_parameters(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.slices().iter().all(|s| s.iter().all(|x| x.is_finite()))
    }
}

