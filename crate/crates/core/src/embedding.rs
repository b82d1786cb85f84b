//! GloVe-style word vectors and text embedding files.
//!
//! Training fits `w_i · w̃_j + b_i + b̃_j ≈ log X_ij` under the weighting
//! `f(x) = min(1, (x / x_max)^α)` with AdaGrad, one pass over the shuffled
//! co-occurrence entries per epoch. The returned vectors are `w + w̃`.
//!
//! Embedding files use the common GloVe text layout: one line per word, the
//! token followed by `dim` floats, single-space separated.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::write_atomic;
use crate::error::{Error, Result};
use crate::rng::{seeded, RandomSource};
use crate::tokenizer::{Vocabulary, PAD_ID};

/// Sparse symmetric co-occurrence counts, entries sorted by `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CooccurrenceTable {
    pub vocab_size: usize,
    pub window: usize,
    entries: Vec<(u32, u32, f64)>,
}

impl CooccurrenceTable {
    pub fn from_entries(vocab_size: usize, window: usize, mut entries: Vec<(u32, u32, f64)>) -> Result<Self> {
        if let Some(&(i, j, x)) = entries
            .iter()
            .find(|&&(i, j, x)| i as usize >= vocab_size || j as usize >= vocab_size || x.is_nan() || x <= 0.0)
        {
            return Err(Error::InvalidArgument(format!("bad co-occurrence entry ({i}, {j}, {x})")));
        }
        entries.sort_by_key(|&(i, j, _)| (i, j));
        Ok(CooccurrenceTable {
            vocab_size,
            window,
            entries,
        })
    }

    pub fn entries(&self) -> &[(u32, u32, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: u32, j: u32) -> f64 {
        self.entries
            .binary_search_by_key(&(i, j), |&(a, b, _)| (a, b))
            .map(|k| self.entries[k].2)
            .unwrap_or(0.0)
    }
}

/// Counts symmetric co-occurrences within `window` tokens inside each
/// document; a neighbour at distance `d` adds `1/d`.
pub fn build_cooccurrence(docs: &[Vec<u32>], vocab_size: usize, window: usize) -> Result<CooccurrenceTable> {
    if window == 0 {
        return Err(Error::InvalidArgument("window must be at least 1".into()));
    }
    if docs.iter().all(Vec::is_empty) {
        return Err(Error::EmptyCorpus);
    }
    let mut counts: HashMap<(u32, u32), f64> = HashMap::new();
    for doc in docs {
        for (p, &center) in doc.iter().enumerate() {
            if center as usize >= vocab_size {
                return Err(Error::Shape(format!("token id {center} >= vocab size {vocab_size}")));
            }
            for d in 1..=window.min(p) {
                let context = doc[p - d];
                let w = 1.0 / d as f64;
                *counts.entry((center, context)).or_default() += w;
                *counts.entry((context, center)).or_default() += w;
            }
        }
    }
    CooccurrenceTable::from_entries(vocab_size, window, counts.into_iter().map(|((i, j), x)| (i, j, x)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GloveConfig {
    pub dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub x_max: f64,
    pub alpha: f64,
    pub window: usize,
    pub seed: u64,
}

impl Default for GloveConfig {
    fn default() -> Self {
        GloveConfig {
            dim: 300,
            epochs: 25,
            learning_rate: 0.05,
            x_max: 100.0,
            alpha: 0.75,
            window: 10,
            seed: 0,
        }
    }
}

pub fn glove_weight(x: f64, x_max: f64, alpha: f64) -> f64 {
    if x < x_max {
        (x / x_max).powf(alpha)
    } else {
        1.0
    }
}

#[derive(Debug, Clone)]
pub struct GloveModel {
    pub word: Array2<f64>,
    pub context: Array2<f64>,
    pub word_bias: Array1<f64>,
    pub context_bias: Array1<f64>,
}

impl GloveModel {
    fn init(vocab_size: usize, dim: usize, rng: &mut RandomSource) -> Self {
        let scale = 1.0 / dim as f64;
        let mut draw = |_| (rng.random::<f64>() - 0.5) * scale;
        GloveModel {
            word: Array2::from_shape_fn((vocab_size, dim), |_| draw(())),
            context: Array2::from_shape_fn((vocab_size, dim), |_| draw(())),
            word_bias: Array1::from_shape_fn(vocab_size, |_| draw(())),
            context_bias: Array1::from_shape_fn(vocab_size, |_| draw(())),
        }
    }

    /// `½ Σ f(X_ij) (w_i·w̃_j + b_i + b̃_j − log X_ij)²`.
    pub fn objective(&self, table: &CooccurrenceTable, x_max: f64, alpha: f64) -> f64 {
        table
            .entries()
            .iter()
            .map(|&(i, j, x)| {
                let diff = self.word.row(i as usize).dot(&self.context.row(j as usize))
                    + self.word_bias[i as usize]
                    + self.context_bias[j as usize]
                    - x.ln();
                0.5 * glove_weight(x, x_max, alpha) * diff * diff
            })
            .sum()
    }

    /// Word plus context vectors, with the PAD row zeroed.
    pub fn vectors(&self) -> Array2<f64> {
        let mut v = &self.word + &self.context;
        v.row_mut(PAD_ID as usize).fill(0.0);
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GloveReport {
    /// Objective before training, then after each epoch.
    pub objective: Vec<f64>,
}

pub fn train_glove(table: &CooccurrenceTable, cfg: &GloveConfig) -> Result<(EmbeddingMatrix, GloveReport)> {
    let (model, report) = fit_glove(table, cfg)?;
    Ok((EmbeddingMatrix::new(model.vectors(), false)?, report))
}

/// Runs AdaGrad on the weighted least-squares objective and returns the raw
/// parameters. The PAD row is never updated.
pub fn fit_glove(table: &CooccurrenceTable, cfg: &GloveConfig) -> Result<(GloveModel, GloveReport)> {
    if table.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if cfg.dim == 0 {
        return Err(Error::InvalidArgument("dim must be positive".into()));
    }
    let mut rng = seeded(cfg.seed);
    let mut m = GloveModel::init(table.vocab_size, cfg.dim, &mut rng);
    m.word.row_mut(PAD_ID as usize).fill(0.0);
    m.context.row_mut(PAD_ID as usize).fill(0.0);
    m.word_bias[PAD_ID as usize] = 0.0;
    m.context_bias[PAD_ID as usize] = 0.0;

    let v = table.vocab_size;
    let mut gsq_word = Array2::<f64>::ones((v, cfg.dim));
    let mut gsq_context = Array2::<f64>::ones((v, cfg.dim));
    let mut gsq_wb = Array1::<f64>::ones(v);
    let mut gsq_cb = Array1::<f64>::ones(v);

    let mut objective = vec![m.objective(table, cfg.x_max, cfg.alpha)];
    let mut order: Vec<usize> = (0..table.len()).collect();
    let eta = cfg.learning_rate;
    let mut g_word = vec![0.0; cfg.dim];
    let mut g_context = vec![0.0; cfg.dim];
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &k in &order {
            let (i, j, x) = table.entries()[k];
            let (i, j) = (i as usize, j as usize);
            let diff = m.word.row(i).dot(&m.context.row(j)) + m.word_bias[i] + m.context_bias[j] - x.ln();
            let fdiff = glove_weight(x, cfg.x_max, cfg.alpha) * diff;
            if !fdiff.is_finite() {
                return Err(Error::Divergence(format!("non-finite GloVe update in epoch {}", epoch + 1)));
            }
            for d in 0..cfg.dim {
                g_word[d] = fdiff * m.context[[j, d]];
                g_context[d] = fdiff * m.word[[i, d]];
            }
            if i != PAD_ID as usize {
                for d in 0..cfg.dim {
                    m.word[[i, d]] -= eta * g_word[d] / gsq_word[[i, d]].sqrt();
                    gsq_word[[i, d]] += g_word[d] * g_word[d];
                }
                m.word_bias[i] -= eta * fdiff / gsq_wb[i].sqrt();
                gsq_wb[i] += fdiff * fdiff;
            }
            if j != PAD_ID as usize {
                for d in 0..cfg.dim {
                    m.context[[j, d]] -= eta * g_context[d] / gsq_context[[j, d]].sqrt();
                    gsq_context[[j, d]] += g_context[d] * g_context[d];
                }
                m.context_bias[j] -= eta * fdiff / gsq_cb[j].sqrt();
                gsq_cb[j] += fdiff * fdiff;
            }
        }
        let j = m.objective(table, cfg.x_max, cfg.alpha);
        if !j.is_finite() {
            return Err(Error::Divergence(format!("objective is {j} after epoch {}", epoch + 1)));
        }
        objective.push(j);
    }
    Ok((m, GloveReport { objective }))
}

/// A `vocab_size × dim` table of vectors, row `i` for token id `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub vectors: Array2<f64>,
    pub frozen: bool,
}

impl EmbeddingMatrix {
    pub fn new(vectors: Array2<f64>, frozen: bool) -> Result<Self> {
        if vectors.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("embedding contains non-finite values".into()));
        }
        Ok(EmbeddingMatrix { vectors, frozen })
    }

    pub fn vocab_size(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }
}

pub fn cosine_similarity(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    let denom = a.dot(&a).sqrt() * b.dot(&b).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        a.dot(&b) / denom
    }
}

/// Parses an embedding file and aligns its rows to `vocab`. Vocabulary words
/// missing from the file get a seeded uniform(−0.05, 0.05) row; PAD is zero.
pub fn load_embedding_file(path: &Path, vocab: &Vocabulary, seed: u64) -> Result<EmbeddingMatrix> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&content, &path.display().to_string(), vocab, seed)
}

pub fn parse_embeddings(content: &str, source_name: &str, vocab: &Vocabulary, seed: u64) -> Result<EmbeddingMatrix> {
    let mut found: HashMap<u32, Vec<f64>> = HashMap::new();
    let mut dim = None;
    for (i, line) in content.lines().enumerate() {
        let mut fields = line.split(' ');
        let Some(token) = fields.next().filter(|t| !t.is_empty()) else {
            continue;
        };
        let values = fields
            .filter(|f| !f.is_empty())
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::format(source_name, Some(i + 1), format!("bad number: {e}")))?;
        match dim {
            None if values.is_empty() => {
                return Err(Error::format(source_name, Some(i + 1), "line has no vector values"));
            }
            None => dim = Some(values.len()),
            Some(d) if d != values.len() => {
                return Err(Error::format(
                    source_name,
                    Some(i + 1),
                    format!("expected {d} values, found {}", values.len()),
                ));
            }
            Some(_) => {}
        }
        if let Some(id) = vocab.id(token) {
            found.entry(id).or_insert(values);
        }
    }
    let dim = dim.ok_or_else(|| Error::format(source_name, None, "no vectors in file"))?;
    let mut rng = seeded(seed);
    let mut vectors = Array2::<f64>::zeros((vocab.len(), dim));
    for id in 0..vocab.len() as u32 {
        let mut row = vectors.row_mut(id as usize);
        if id == PAD_ID {
            continue;
        }
        match found.get(&id) {
            Some(v) => row.assign(&Array1::from_vec(v.clone())),
            None => row.mapv_inplace(|_| rng.random_range(-0.05..0.05)),
        }
    }
    EmbeddingMatrix::new(vectors, false)
}

/// Writes one line per vocabulary entry (PAD and UNK included).
pub fn save_embedding_file(path: &Path, vocab: &Vocabulary, matrix: &EmbeddingMatrix) -> Result<()> {
    if vocab.len() != matrix.vocab_size() {
        return Err(Error::Shape(format!(
            "vocabulary has {} tokens but matrix has {} rows",
            vocab.len(),
            matrix.vocab_size()
        )));
    }
    let mut out = String::new();
    for (token, row) in vocab.tokens().iter().zip(matrix.vectors.rows()) {
        out.push_str(token);
        for x in row {
            let _ = write!(out, " {x}");
        }
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}
