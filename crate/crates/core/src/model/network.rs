//! Batched forward pass and backpropagation through time.
//!
//! Sequences are processed in order of decreasing length so that the rows
//! still running at step `t` form a prefix of the batch. PAD positions past
//! a sequence's true length never enter the recurrence, which makes outputs
//! independent of how much padding a sequence carries.
//!
//! GRU (gates `z`, `r`, candidate `n`, recurrent biases inside the reset):
//!
//! ```text
//! z = σ(x Wz + bz + h Uz + cz)      r = σ(x Wr + br + h Ur + cr)
//! n = tanh(x Wn + bn + r ⊙ (h Un + cn))
//! h' = (1 − z) ⊙ n + z ⊙ h
//! ```
//!
//! LSTM (gates `i`, `f`, `g`, `o`):
//!
//! ```text
//! [i f g o] = [σ σ tanh σ](x W + b + h U)
//! c' = f ⊙ c + i ⊙ g      h' = o ⊙ tanh(c')
//! ```
//!
//! The input projection `x W + b` is read from a precomputed
//! `vocab × gates` table when the vocabulary is no larger than the number of
//! tokens in the batch, and computed from gathered embedding rows otherwise.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, Axis};
use rand::Rng;

use super::{CellType, Classifier, Params};
use crate::cipher::CipherLabel;
use crate::error::{Error, Result};
use crate::rng::RandomSource;
use crate::tokenizer::PAD_ID;

const PROB_FLOOR: f64 = 1e-12;

/// One input sequence: `ids[..len]` are real tokens, the rest is padding.
#[derive(Debug, Clone, Copy)]
pub struct Sequence<'a> {
    pub ids: &'a [u32],
    pub len: usize,
}

impl<'a> Sequence<'a> {
    pub fn new(ids: &'a [u32], len: usize) -> Self {
        Sequence { ids, len }
    }

    pub fn unpadded(ids: &'a [u32]) -> Self {
        Sequence { ids, len: ids.len() }
    }
}

/// Inverted-dropout multipliers (0 or `1/(1-p)`) for the two head layers,
/// one row per batch element in batch order.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub first: Array2<f64>,
    pub second: Array2<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Batch layout shared by forward and backward.
#[derive(Debug, Clone)]
struct Layout {
    /// Batch indices sorted by decreasing length (stable).
    order: Vec<usize>,
    /// Rows still running at each step.
    active: Vec<usize>,
    /// Start of each step's rows in the step-major token stack.
    offsets: Vec<usize>,
    tokens: Vec<u32>,
    use_table: bool,
}

impl Layout {
    fn new(batch: &[Sequence], vocab_size: usize) -> Result<Self> {
        for (b, seq) in batch.iter().enumerate() {
            if seq.len > seq.ids.len() {
                return Err(Error::Shape(format!(
                    "sequence {b}: length {} exceeds {} ids",
                    seq.len,
                    seq.ids.len()
                )));
            }
            if let Some(&bad) = seq.ids[..seq.len].iter().find(|&&id| id as usize >= vocab_size) {
                return Err(Error::Shape(format!("sequence {b}: id {bad} >= vocab size {vocab_size}")));
            }
        }
        let mut order: Vec<usize> = (0..batch.len()).collect();
        order.sort_by(|&a, &b| batch[b].len.cmp(&batch[a].len));
        let steps = order.first().map_or(0, |&b| batch[b].len);
        let mut active = Vec::with_capacity(steps);
        let mut offsets = Vec::with_capacity(steps + 1);
        let mut tokens = Vec::new();
        offsets.push(0);
        for t in 0..steps {
            let n = order.iter().take_while(|&&b| batch[b].len > t).count();
            active.push(n);
            tokens.extend(order[..n].iter().map(|&b| batch[b].ids[t]));
            offsets.push(tokens.len());
        }
        let use_table = vocab_size <= tokens.len();
        Ok(Layout {
            order,
            active,
            offsets,
            tokens,
            use_table,
        })
    }

    fn rows(&self, t: usize) -> std::ops::Range<usize> {
        self.offsets[t]..self.offsets[t + 1]
    }
}

/// Everything the backward pass needs from a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    layout: Layout,
    /// Activated gates per token row (step-major, sorted batch order).
    gates: Array2<f64>,
    /// GRU: `h Un + cn`; LSTM: previous cell state.
    aux: Array2<f64>,
    /// LSTM: `tanh(c')`; empty for GRU.
    tanh_cell: Array2<f64>,
    h_prev: Array2<f64>,
    h_final: Array2<f64>,
    a1: Array2<f64>,
    d1: Array2<f64>,
    a2: Array2<f64>,
    d2: Array2<f64>,
    masks: Option<DropoutMasks>,
    probs_sorted: Array2<f64>,
    /// Class probabilities in the caller's batch order.
    pub probs: Array2<f64>,
}

/// Per-step activations kept for backprop: gates, aux, tanh(cell), h_prev.
type StepCache = (Array2<f64>, Array2<f64>, Array2<f64>, Array2<f64>);

struct Recurrence {
    h_final: Array2<f64>,
    cache: Option<StepCache>,
}

impl Classifier {
    pub fn sample_dropout(&self, batch_size: usize, rng: &mut RandomSource) -> DropoutMasks {
        let p = self.config.dropout;
        let keep = 1.0 / (1.0 - p);
        let mut draw = |cols: usize| {
            Array2::from_shape_fn((batch_size, cols), |_| if rng.random::<f64>() < p { 0.0 } else { keep })
        };
        let [h1, h2] = self.config.head_dims;
        let first = draw(h1);
        let second = draw(h2);
        DropoutMasks { first, second }
    }

    /// Class probabilities, one row per sequence. Dropout is applied only
    /// when `masks` is given (training mode).
    pub fn forward(&self, batch: &[Sequence], masks: Option<&DropoutMasks>) -> Result<Array2<f64>> {
        let layout = Layout::new(batch, self.config.vocab_size)?;
        let rec = self.run_recurrence(&layout, false);
        let sorted_masks = masks.map(|m| permute_masks(m, &layout.order)).transpose()?;
        let head = self.run_head(&rec.h_final, sorted_masks.as_ref());
        Ok(unsort(&head.probs, &layout.order))
    }

    /// Training-mode forward pass that keeps the activations for
    /// [`Classifier::backward`].
    pub fn forward_train(&self, batch: &[Sequence], masks: Option<&DropoutMasks>) -> Result<ForwardPass> {
        let layout = Layout::new(batch, self.config.vocab_size)?;
        let rec = self.run_recurrence(&layout, true);
        let sorted_masks = masks.map(|m| permute_masks(m, &layout.order)).transpose()?;
        let head = self.run_head(&rec.h_final, sorted_masks.as_ref());
        let probs = unsort(&head.probs, &layout.order);
        let (gates, aux, tanh_cell, h_prev) = rec.cache.expect("cached recurrence");
        Ok(ForwardPass {
            layout,
            gates,
            aux,
            tanh_cell,
            h_prev,
            h_final: rec.h_final,
            a1: head.a1,
            d1: head.d1,
            a2: head.a2,
            d2: head.d2,
            masks: sorted_masks,
            probs_sorted: head.probs,
            probs,
        })
    }

    fn input_table(&self) -> Array2<f64> {
        let p = &self.params;
        let mut table = p.embedding.dot(&p.w_input);
        table += &p.b_input;
        table
    }

    fn run_recurrence(&self, layout: &Layout, keep: bool) -> Recurrence {
        let p = &self.params;
        let h = self.config.hidden_dim;
        let gh = self.config.cell.gates() * h;
        let batch = layout.order.len();
        let n_tok = layout.tokens.len();
        let table = layout.use_table.then(|| self.input_table());

        let mut state = Array2::<f64>::zeros((batch, h));
        let mut cell = Array2::<f64>::zeros((batch, h));
        let (mut gates, mut aux, mut tanh_cell, mut h_prev) = if keep {
            (
                Array2::<f64>::zeros((n_tok, gh)),
                Array2::<f64>::zeros((n_tok, h)),
                Array2::<f64>::zeros((if self.config.cell == CellType::Lstm { n_tok } else { 0 }, h)),
                Array2::<f64>::zeros((n_tok, h)),
            )
        } else {
            (Array2::zeros((0, gh)), Array2::zeros((0, h)), Array2::zeros((0, h)), Array2::zeros((0, h)))
        };
        let mut hu = Array2::<f64>::zeros((batch, gh));
        let mut xp = Array2::<f64>::zeros((batch, gh));
        let mut x = Array2::<f64>::zeros((if table.is_none() { batch } else { 0 }, self.config.embed_dim));

        for (t, &n) in layout.active.iter().enumerate() {
            let rows = layout.rows(t);
            let toks = &layout.tokens[rows.clone()];
            // Input projection for the running rows.
            match &table {
                Some(tab) => {
                    for (r, &tok) in toks.iter().enumerate() {
                        xp.row_mut(r).assign(&tab.row(tok as usize));
                    }
                }
                None => {
                    for (r, &tok) in toks.iter().enumerate() {
                        x.row_mut(r).assign(&p.embedding.row(tok as usize));
                    }
                    let mut out = xp.slice_mut(s![..n, ..]);
                    out.assign(&p.b_input.broadcast((n, gh)).expect("bias broadcast"));
                    general_mat_mul(1.0, &x.slice(s![..n, ..]), &p.w_input, 1.0, &mut out);
                }
            }
            let hp = state.slice(s![..n, ..]);
            if keep {
                h_prev.slice_mut(s![rows.clone(), ..]).assign(&hp);
            }
            general_mat_mul(1.0, &hp, &p.w_recurrent, 0.0, &mut hu.slice_mut(s![..n, ..]));

            for r in 0..n {
                let xr = xp.row(r);
                let xr = xr.as_slice().expect("contiguous row");
                let hur = hu.row(r);
                let hur = hur.as_slice().expect("contiguous row");
                let mut hrow = state.row_mut(r);
                let hrow = hrow.as_slice_mut().expect("contiguous row");
                match self.config.cell {
                    CellType::Gru => {
                        let bh = p.b_recurrent.as_slice().expect("contiguous");
                        for k in 0..h {
                            let z = sigmoid(xr[k] + hur[k] + bh[k]);
                            let rr = sigmoid(xr[h + k] + hur[h + k] + bh[h + k]);
                            let un = hur[2 * h + k] + bh[2 * h + k];
                            let nn = (xr[2 * h + k] + rr * un).tanh();
                            let prev = hrow[k];
                            hrow[k] = (1.0 - z) * nn + z * prev;
                            if keep {
                                let g = rows.start + r;
                                gates[[g, k]] = z;
                                gates[[g, h + k]] = rr;
                                gates[[g, 2 * h + k]] = nn;
                                aux[[g, k]] = un;
                            }
                        }
                    }
                    CellType::Lstm => {
                        let mut crow = cell.row_mut(r);
                        let crow = crow.as_slice_mut().expect("contiguous row");
                        for k in 0..h {
                            let i = sigmoid(xr[k] + hur[k]);
                            let f = sigmoid(xr[h + k] + hur[h + k]);
                            let g = (xr[2 * h + k] + hur[2 * h + k]).tanh();
                            let o = sigmoid(xr[3 * h + k] + hur[3 * h + k]);
                            let c_prev = crow[k];
                            let c = f * c_prev + i * g;
                            let tc = c.tanh();
                            crow[k] = c;
                            hrow[k] = o * tc;
                            if keep {
                                let row = rows.start + r;
                                gates[[row, k]] = i;
                                gates[[row, h + k]] = f;
                                gates[[row, 2 * h + k]] = g;
                                gates[[row, 3 * h + k]] = o;
                                aux[[row, k]] = c_prev;
                                tanh_cell[[row, k]] = tc;
                            }
                        }
                    }
                }
            }
        }
        Recurrence {
            h_final: state,
            cache: keep.then_some((gates, aux, tanh_cell, h_prev)),
        }
    }

    fn run_head(&self, h_final: &Array2<f64>, masks: Option<&DropoutMasks>) -> HeadOut {
        let p = &self.params;
        let a1 = h_final.dot(&p.w_head1) + &p.b_head1;
        let mut d1 = a1.mapv(|v| v.max(0.0));
        if let Some(m) = masks {
            d1 *= &m.first;
        }
        let a2 = d1.dot(&p.w_head2) + &p.b_head2;
        let mut d2 = a2.mapv(|v| v.max(0.0));
        if let Some(m) = masks {
            d2 *= &m.second;
        }
        let mut probs = d2.dot(&p.w_out) + &p.b_out;
        for mut row in probs.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            row.mapv_inplace(|v| (v - max).exp());
            let sum = row.sum();
            row /= sum;
        }
        HeadOut { a1, d1, a2, d2, probs }
    }

    /// Mean cross-entropy of `pass` against `labels` and the exact gradient
    /// of that loss with respect to every parameter.
    pub fn backward(&self, pass: ForwardPass, labels: &[CipherLabel]) -> Result<(f64, Params)> {
        let batch = pass.layout.order.len();
        if labels.len() != batch {
            return Err(Error::Shape(format!("{} labels for a batch of {batch}", labels.len())));
        }
        let loss = cross_entropy(&pass.probs, labels);
        let p = &self.params;
        let mut g = Params::zeros(&self.config);
        if batch == 0 {
            return Ok((loss, g));
        }
        let h = self.config.hidden_dim;
        let gh = self.config.cell.gates() * h;
        let layout = &pass.layout;

        // Softmax + cross-entropy.
        let mut dlogits = pass.probs_sorted.clone();
        for (r, &b) in layout.order.iter().enumerate() {
            dlogits[[r, labels[b].index()]] -= 1.0;
        }
        dlogits /= batch as f64;

        g.w_out = pass.d2.t().dot(&dlogits);
        g.b_out = dlogits.sum_axis(Axis(0));
        let mut da2 = dlogits.dot(&p.w_out.t());
        if let Some(m) = &pass.masks {
            da2 *= &m.second;
        }
        da2.zip_mut_with(&pass.a2, |d, &a| {
            if a <= 0.0 {
                *d = 0.0
            }
        });
        g.w_head2 = pass.d1.t().dot(&da2);
        g.b_head2 = da2.sum_axis(Axis(0));
        let mut da1 = da2.dot(&p.w_head2.t());
        if let Some(m) = &pass.masks {
            da1 *= &m.first;
        }
        da1.zip_mut_with(&pass.a1, |d, &a| {
            if a <= 0.0 {
                *d = 0.0
            }
        });
        g.w_head1 = pass.h_final.t().dot(&da1);
        g.b_head1 = da1.sum_axis(Axis(0));
        let mut dh = da1.dot(&p.w_head1.t());

        // Backpropagation through time.
        let mut dc = Array2::<f64>::zeros((batch, h));
        let mut dxp = Array2::<f64>::zeros((batch, gh));
        let mut dhu = Array2::<f64>::zeros((batch, gh));
        let mut table_grad = layout
            .use_table
            .then(|| Array2::<f64>::zeros((self.config.vocab_size, gh)));
        let mut x = Array2::<f64>::zeros((if layout.use_table { 0 } else { batch }, self.config.embed_dim));
        let mut dx = Array2::<f64>::zeros((if layout.use_table { 0 } else { batch }, self.config.embed_dim));
        let trainable = self.config.embedding_trainable();

        for t in (0..layout.active.len()).rev() {
            let n = layout.active[t];
            let rows = layout.rows(t);
            for r in 0..n {
                let row = rows.start + r;
                let gt = pass.gates.row(row);
                let gt = gt.as_slice().expect("contiguous row");
                let ax = pass.aux.row(row);
                let ax = ax.as_slice().expect("contiguous row");
                let mut dh_row = dh.row_mut(r);
                let dh_row = dh_row.as_slice_mut().expect("contiguous row");
                let mut dxp_row = dxp.row_mut(r);
                let dxp_row = dxp_row.as_slice_mut().expect("contiguous row");
                let mut dhu_row = dhu.row_mut(r);
                let dhu_row = dhu_row.as_slice_mut().expect("contiguous row");
                match self.config.cell {
                    CellType::Gru => {
                        let hp = pass.h_prev.row(row);
                        let hp = hp.as_slice().expect("contiguous row");
                        for k in 0..h {
                            let (z, rr, nn) = (gt[k], gt[h + k], gt[2 * h + k]);
                            let d = dh_row[k];
                            let dn = d * (1.0 - z);
                            let dz = d * (hp[k] - nn);
                            let dan = dn * (1.0 - nn * nn);
                            let daz = dz * z * (1.0 - z);
                            let dar = dan * ax[k] * rr * (1.0 - rr);
                            dxp_row[k] = daz;
                            dxp_row[h + k] = dar;
                            dxp_row[2 * h + k] = dan;
                            dhu_row[k] = daz;
                            dhu_row[h + k] = dar;
                            dhu_row[2 * h + k] = dan * rr;
                            dh_row[k] = d * z;
                        }
                    }
                    CellType::Lstm => {
                        let tc = pass.tanh_cell.row(row);
                        let tc = tc.as_slice().expect("contiguous row");
                        let mut dc_row = dc.row_mut(r);
                        let dc_row = dc_row.as_slice_mut().expect("contiguous row");
                        for k in 0..h {
                            let (i, f, gg, o) = (gt[k], gt[h + k], gt[2 * h + k], gt[3 * h + k]);
                            let d = dh_row[k];
                            let d_o = d * tc[k];
                            let dcell = dc_row[k] + d * o * (1.0 - tc[k] * tc[k]);
                            let di = dcell * gg;
                            let dg = dcell * i;
                            let df = dcell * ax[k];
                            dc_row[k] = dcell * f;
                            dxp_row[k] = di * i * (1.0 - i);
                            dxp_row[h + k] = df * f * (1.0 - f);
                            dxp_row[2 * h + k] = dg * (1.0 - gg * gg);
                            dxp_row[3 * h + k] = d_o * o * (1.0 - o);
                            dh_row[k] = 0.0;
                        }
                        dhu_row.copy_from_slice(dxp_row);
                    }
                }
            }
            let dhu_n = dhu.slice(s![..n, ..]);
            let hp = pass.h_prev.slice(s![rows.clone(), ..]);
            general_mat_mul(1.0, &hp.t(), &dhu_n, 1.0, &mut g.w_recurrent);
            if self.config.cell == CellType::Gru {
                g.b_recurrent += &dhu_n.sum_axis(Axis(0));
            }
            general_mat_mul(1.0, &dhu_n, &p.w_recurrent.t(), 1.0, &mut dh.slice_mut(s![..n, ..]));

            let dxp_n = dxp.slice(s![..n, ..]);
            g.b_input += &dxp_n.sum_axis(Axis(0));
            let toks = &layout.tokens[rows];
            match table_grad.as_mut() {
                Some(tg) => {
                    for (r, &tok) in toks.iter().enumerate() {
                        let mut dst = tg.row_mut(tok as usize);
                        dst += &dxp_n.row(r);
                    }
                }
                None => {
                    for (r, &tok) in toks.iter().enumerate() {
                        x.row_mut(r).assign(&p.embedding.row(tok as usize));
                    }
                    general_mat_mul(1.0, &x.slice(s![..n, ..]).t(), &dxp_n, 1.0, &mut g.w_input);
                    if trainable {
                        let mut dxn = dx.slice_mut(s![..n, ..]);
                        general_mat_mul(1.0, &dxp_n, &p.w_input.t(), 0.0, &mut dxn);
                        for (r, &tok) in toks.iter().enumerate() {
                            let mut dst = g.embedding.row_mut(tok as usize);
                            dst += &dxn.row(r);
                        }
                    }
                }
            }
        }
        if let Some(tg) = table_grad {
            g.w_input = p.embedding.t().dot(&tg);
            if trainable {
                g.embedding = tg.dot(&p.w_input.t());
            }
        }
        g.embedding.row_mut(PAD_ID as usize).fill(0.0);
        Ok((loss, g))
    }
}

struct HeadOut {
    a1: Array2<f64>,
    d1: Array2<f64>,
    a2: Array2<f64>,
    d2: Array2<f64>,
    probs: Array2<f64>,
}

fn permute_rows(m: ArrayView2<f64>, order: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((order.len(), m.ncols()));
    for (r, &b) in order.iter().enumerate() {
        out.row_mut(r).assign(&m.row(b));
    }
    out
}

fn permute_masks(m: &DropoutMasks, order: &[usize]) -> Result<DropoutMasks> {
    if m.first.nrows() != order.len() || m.second.nrows() != order.len() {
        return Err(Error::Shape(format!(
            "dropout masks have {} rows for a batch of {}",
            m.first.nrows(),
            order.len()
        )));
    }
    Ok(DropoutMasks {
        first: permute_rows(m.first.view(), order),
        second: permute_rows(m.second.view(), order),
    })
}

fn unsort(sorted: &Array2<f64>, order: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros(sorted.dim());
    for (r, &b) in order.iter().enumerate() {
        out.row_mut(b).assign(&sorted.row(r));
    }
    out
}

/// Mean over the batch of `−ln p(true class)`, with probabilities floored
/// at 1e-12.
pub fn cross_entropy(probs: &Array2<f64>, labels: &[CipherLabel]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(b, l)| -probs[[b, l.index()]].max(PROB_FLOOR).ln())
        .sum();
    total / labels.len() as f64
}

/// Index of the largest probability in each row (first wins on ties).
pub fn argmax_rows(probs: &Array2<f64>) -> Vec<usize> {
    probs
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, CellType};

    fn tiny(cell: CellType, vocab: usize) -> Classifier {
        let mut cfg = ModelConfig::new(cell, vocab, 16);
        cfg.embed_dim = 5;
        cfg.hidden_dim = 4;
        cfg.head_dims = [6, 6];
        Classifier::new(cfg, 11).unwrap()
    }

    #[test]
    fn rows_sum_to_one() {
        for cell in [CellType::Gru, CellType::Lstm] {
            let m = tiny(cell, 10);
            let seqs = [vec![1u32, 2, 3], vec![4, 5], vec![9]];
            let batch: Vec<Sequence> = seqs.iter().map(|s| Sequence::unpadded(s)).collect();
            let probs = m.forward(&batch, None).unwrap();
            for row in probs.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|&p| p > 0.0 && p < 1.0));
            }
        }
    }

    #[test]
    fn zero_output_layer_gives_uniform() {
        let mut m = tiny(CellType::Gru, 10);
        m.params.w_out.fill(0.0);
        m.params.b_out.fill(0.0);
        let ids = [3u32, 4, 5];
        let probs = m.forward(&[Sequence::unpadded(&ids)], None).unwrap();
        for &p in probs.iter() {
            assert!((p - 1.0 / 6.0).abs() < 1e-15);
        }
        let loss = cross_entropy(&probs, &[CipherLabel::TextReversal]);
        assert!((loss - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_id_is_a_shape_error() {
        let m = tiny(CellType::Lstm, 10);
        let ids = [3u32, 10];
        assert!(matches!(m.forward(&[Sequence::unpadded(&ids)], None), Err(Error::Shape(_))));
        assert!(matches!(m.forward(&[Sequence::new(&ids, 3)], None), Err(Error::Shape(_))));
    }

    #[test]
    fn table_and_gather_routes_agree() {
        // Vocab 10: one 3-token sequence uses gathered rows, the same
        // sequence next to a long one uses the table.
        let m = tiny(CellType::Gru, 10);
        let short = [1u32, 2, 3];
        let long: Vec<u32> = (0..12).map(|i| 1 + i % 9).collect();
        let alone = m.forward(&[Sequence::unpadded(&short)], None).unwrap();
        let both = m
            .forward(&[Sequence::unpadded(&short), Sequence::unpadded(&long)], None)
            .unwrap();
        for c in 0..6 {
            assert!((alone[[0, c]] - both[[0, c]]).abs() < 1e-14);
        }
    }

    #[test]
    fn empty_sequence_uses_zero_state() {
        let m = tiny(CellType::Lstm, 10);
        let probs = m.forward(&[Sequence::unpadded(&[])], None).unwrap();
        assert!((probs.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn argmax_first_on_ties() {
        let p = Array2::from_shape_vec((2, 3), vec![0.2, 0.4, 0.4, 0.5, 0.3, 0.2]).unwrap();
        assert_eq!(argmax_rows(&p), vec![1, 0]);
    }
}
