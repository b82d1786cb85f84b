//! End-to-end experiments driven by one JSON config.
//!
//! Artifacts live under `<output.dir>/<config hash>/`:
//!
//! ```text
//! dataset/{train,valid,test,tokenizer_corpus}.txt
//! tokenizer/tokenizer.json
//! embeddings/embeddings.txt        (only when embeddings are used)
//! model/model.bin, model/history.json
//! report.csv, report.json
//! ```
//!
//! A stage whose artifacts already exist is loaded instead of recomputed,
//! so rerunning an unchanged config only re-evaluates the saved model.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cipher::{CipherLabel, NUM_CLASSES};
use crate::corpus::{
    build_dataset, encipher_round_robin, load_clean_corpus, normalize_text, read_dataset, write_atomic,
    write_dataset, LabeledRecord, LengthWindow, SplitSpec,
};
use crate::embedding::{build_cooccurrence, load_embedding_file, save_embedding_file, train_glove, EmbeddingMatrix, GloveConfig};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, ConfusionMatrix, ResultRow};
use crate::model::{
    encode_records, load_model, save_model, train, CellType, Classifier, EmbeddingMode, EpochStats, ModelConfig,
    Sequence, TrainConfig,
};
use crate::report::Report;
use crate::rng::{derive_seed, seeded};
use crate::tokenizer::{train_tokenizer, Tokenizer, TokenizerKind, DEFAULT_SUBWORD_VOCAB, DEFAULT_WORD_VOCAB};

/// Seed streams of the pipeline stages, passed to `derive_seed`.
pub const DATASET_STREAM: u64 = 10;
pub const TOKENIZER_CORPUS_STREAM: u64 = 11;
pub const EMBEDDING_STREAM: u64 = 12;
pub const MODEL_INIT_STREAM: u64 = 13;
pub const TRAIN_STREAM: u64 = 14;

/// Length of the hex config-hash prefix used as the run directory name.
const HASH_PREFIX: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub path: PathBuf,
    #[serde(default = "default_min_len")]
    pub min_len: usize,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
}

fn default_min_len() -> usize {
    LengthWindow::default().min_len
}

fn default_max_len() -> usize {
    LengthWindow::default().max_len
}

impl CorpusConfig {
    pub fn window(&self) -> LengthWindow {
        LengthWindow {
            min_len: self.min_len,
            max_len: self.max_len,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl DatasetConfig {
    pub fn split(&self) -> SplitSpec {
        SplitSpec::new(self.train, self.valid, self.test)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenizerConfig {
    pub kind: TokenizerKind,
    /// Defaults to 20000 for word and 8000 for subword tokenizers.
    #[serde(default)]
    pub vocab_size: Option<usize>,
    /// Use this tokenizer file instead of training one.
    #[serde(default)]
    pub path: Option<PathBuf>,
}

impl TokenizerConfig {
    pub fn effective_vocab_size(&self) -> usize {
        self.vocab_size.unwrap_or(match self.kind {
            TokenizerKind::Word => DEFAULT_WORD_VOCAB,
            _ => DEFAULT_SUBWORD_VOCAB,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    /// Randomly initialised, trained with the classifier.
    #[default]
    None,
    /// GloVe vectors trained on the tokenizer corpus.
    Glove,
    /// Vectors read from a text embedding file.
    File,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingsConfig {
    #[serde(default)]
    pub source: EmbeddingSource,
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Keep the vectors fixed during classifier training.
    #[serde(default)]
    pub frozen: bool,
    #[serde(default)]
    pub glove: GloveSettings,
}

/// GloVe settings; the vector size always follows `model.embed_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GloveSettings {
    pub epochs: usize,
    pub learning_rate: f64,
    pub x_max: f64,
    pub alpha: f64,
    pub window: usize,
}

impl Default for GloveSettings {
    fn default() -> Self {
        let g = GloveConfig::default();
        GloveSettings {
            epochs: g.epochs,
            learning_rate: g.learning_rate,
            x_max: g.x_max,
            alpha: g.alpha,
            window: g.window,
        }
    }
}

impl GloveSettings {
    pub fn to_glove_config(&self, dim: usize, seed: u64) -> GloveConfig {
        GloveConfig {
            dim,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            x_max: self.x_max,
            alpha: self.alpha,
            window: self.window,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub cell: CellType,
    #[serde(default = "default_embed_dim")]
    pub embed_dim: usize,
    #[serde(default = "default_hidden_dim")]
    pub hidden_dim: usize,
    #[serde(default = "default_head_dims")]
    pub head_dims: [usize; 2],
    #[serde(default = "default_dropout")]
    pub dropout: f64,
    /// Defaults to the tokenizer kind's sequence cap.
    #[serde(default)]
    pub max_len: Option<usize>,
}

fn default_embed_dim() -> usize {
    300
}

fn default_hidden_dim() -> usize {
    256
}

fn default_head_dims() -> [usize; 2] {
    [512, 512]
}

fn default_dropout() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            epochs: t.epochs,
            lr: t.lr,
            batch_size: t.batch_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Row label in the report; derived from the cell and tokenizer if unset.
    pub name: Option<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("runs"),
            name: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub corpus: CorpusConfig,
    pub dataset: DatasetConfig,
    pub tokenizer: TokenizerConfig,
    #[serde(default)]
    pub embeddings: EmbeddingsConfig,
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub output: OutputConfig,
}

fn config_error(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.to_string(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// Parses a config. Relative paths are resolved against `base_dir`.
    pub fn from_json(json: &str, base_dir: &Path) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(json);
        let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            Error::Config {
                field: if field == "." { "<root>".into() } else { field },
                message: e.inner().to_string(),
            }
        })?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        resolve(&mut cfg.corpus.path);
        if let Some(p) = cfg.tokenizer.path.as_mut() {
            resolve(p);
        }
        if let Some(p) = cfg.embeddings.path.as_mut() {
            resolve(p);
        }
        resolve(&mut cfg.output.dir);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        ExperimentConfig::from_json(&json, base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpus.min_len > self.corpus.max_len {
            return Err(config_error("corpus.min_len", "must not exceed corpus.max_len"));
        }
        if self.dataset.train == 0 {
            return Err(config_error("dataset.train", "must be at least 1"));
        }
        if self.dataset.valid == 0 {
            return Err(config_error("dataset.valid", "must be at least 1"));
        }
        if self.dataset.test == 0 {
            return Err(config_error("dataset.test", "must be at least 1"));
        }
        let emb = &self.embeddings;
        match emb.source {
            EmbeddingSource::None if emb.frozen => {
                return Err(config_error("embeddings.frozen", "random embeddings cannot be frozen"));
            }
            EmbeddingSource::File if emb.path.is_none() => {
                return Err(config_error("embeddings.path", "required when source is \"file\""));
            }
            EmbeddingSource::Glove | EmbeddingSource::File if self.tokenizer.kind == TokenizerKind::Char => {
                return Err(config_error(
                    "embeddings.source",
                    "pretrained vectors need a word or subword tokenizer",
                ));
            }
            _ => {}
        }
        if emb.source == EmbeddingSource::Glove && (emb.glove.epochs == 0 || emb.glove.window == 0) {
            return Err(config_error("embeddings.glove", "epochs and window must be at least 1"));
        }
        self.model_config(1)
            .validate()
            .map_err(|e| config_error("model", e.to_string()))?;
        self.train_config()
            .validate()
            .map_err(|e| config_error("train", e.to_string()))?;
        Ok(())
    }

    pub fn embedding_mode(&self) -> EmbeddingMode {
        match (self.embeddings.source, self.embeddings.frozen) {
            (EmbeddingSource::None, _) => EmbeddingMode::Learned,
            (_, true) => EmbeddingMode::FrozenPretrained,
            (_, false) => EmbeddingMode::GloveInitialized,
        }
    }

    pub fn max_len(&self) -> usize {
        self.model.max_len.unwrap_or(self.tokenizer.kind.default_max_len())
    }

    pub fn model_config(&self, vocab_size: usize) -> ModelConfig {
        let mut cfg = ModelConfig::new(self.model.cell, vocab_size, self.max_len());
        cfg.embed_dim = self.model.embed_dim;
        cfg.hidden_dim = self.model.hidden_dim;
        cfg.head_dims = self.model.head_dims;
        cfg.dropout = self.model.dropout;
        cfg.embedding_mode = self.embedding_mode();
        cfg
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.train.epochs,
            lr: self.train.lr,
            batch_size: self.train.batch_size,
            seed: derive_seed(self.seed, TRAIN_STREAM),
        }
    }

    /// Report label, e.g. `GRU Character Level`, `LSTM BPE`, `GRU GLOVE (pre)`.
    pub fn model_name(&self) -> String {
        if let Some(name) = &self.output.name {
            return name.clone();
        }
        model_name(
            self.model.cell,
            self.tokenizer.kind,
            self.embeddings.source,
            self.tokenizer.path.is_some(),
        )
    }

    /// SHA-256 of the canonical JSON form, as lowercase hex.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output.dir.join(&self.hash()[..HASH_PREFIX])
    }
}

/// Table-style row name from the parts of a run. `(pre)` marks a loaded
/// tokenizer or embedding file.
pub fn model_name(cell: CellType, kind: TokenizerKind, embeddings: EmbeddingSource, loaded_tokenizer: bool) -> String {
    let tail = match (embeddings, kind) {
        (EmbeddingSource::Glove, _) => "GLOVE",
        (EmbeddingSource::File, _) => "GLOVE (pre)",
        (_, TokenizerKind::Char) => "Character Level",
        (_, TokenizerKind::Word) => "Word Level",
        (_, TokenizerKind::Bpe) => "BPE",
        (_, TokenizerKind::WordPiece) => "WP",
    };
    let pre = loaded_tokenizer && kind != TokenizerKind::Char && embeddings != EmbeddingSource::File;
    format!("{} {tail}{}", cell.name(), if pre { " (pre)" } else { "" })
}

/// Paths of the four dataset files inside a directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetFiles {
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
    pub tokenizer_corpus: PathBuf,
}

impl DatasetFiles {
    pub fn in_dir(dir: &Path) -> Self {
        DatasetFiles {
            train: dir.join("train.txt"),
            valid: dir.join("valid.txt"),
            test: dir.join("test.txt"),
            tokenizer_corpus: dir.join("tokenizer_corpus.txt"),
        }
    }

    pub fn exist(&self) -> bool {
        [&self.train, &self.valid, &self.test, &self.tokenizer_corpus]
            .iter()
            .all(|p| p.is_file())
    }
}

/// Cleans the corpus, builds the three splits and enciphers the unused
/// lines as tokenizer training text; writes all four files into `dir`.
pub fn generate_dataset(corpus: &CorpusConfig, split: SplitSpec, seed: u64, dir: &Path) -> Result<DatasetFiles> {
    let lines = load_clean_corpus(&corpus.path, corpus.window())?;
    if lines.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let ds = build_dataset(&lines, split, &mut seeded(derive_seed(seed, DATASET_STREAM)))?;
    let (tok_corpus, _) = encipher_round_robin(&ds.remainder, &mut seeded(derive_seed(seed, TOKENIZER_CORPUS_STREAM)))?;
    let files = DatasetFiles::in_dir(dir);
    write_dataset(&ds.train, &files.train)?;
    write_dataset(&ds.valid, &files.valid)?;
    write_dataset(&ds.test, &files.test)?;
    write_dataset(&tok_corpus, &files.tokenizer_corpus)?;
    Ok(files)
}

/// Trains a tokenizer of `kind` on the texts of `records`.
pub fn fit_tokenizer(kind: TokenizerKind, vocab_size: usize, records: &[LabeledRecord]) -> Result<Tokenizer> {
    train_tokenizer(kind, records.iter().map(|r| r.text.as_str()), vocab_size)
}

/// GloVe vectors for `tokenizer`'s vocabulary, trained on `records`.
/// PAD and UNK tokens are removed before counting co-occurrences.
pub fn fit_embeddings(tokenizer: &Tokenizer, records: &[LabeledRecord], glove: &GloveConfig) -> Result<EmbeddingMatrix> {
    let unk = tokenizer.vocab().unk_id();
    let pad = tokenizer.vocab().pad_id();
    let docs: Vec<Vec<u32>> = records
        .iter()
        .map(|r| {
            tokenizer
                .tokenize(&r.text)
                .into_iter()
                .filter(|&id| id != pad && Some(id) != unk)
                .collect()
        })
        .collect();
    let table = build_cooccurrence(&docs, tokenizer.vocab_size(), glove.window)?;
    Ok(train_glove(&table, glove)?.0)
}

/// Builds a classifier for `cfg` (with `embedding` when given) and trains it.
pub fn fit_classifier(
    cfg: ModelConfig,
    embedding: Option<&EmbeddingMatrix>,
    tokenizer: &Tokenizer,
    train_set: &[LabeledRecord],
    valid_set: &[LabeledRecord],
    train_cfg: &TrainConfig,
    init_seed: u64,
) -> Result<(Classifier, Vec<EpochStats>)> {
    let mut model = match embedding {
        Some(e) => Classifier::with_embedding(cfg, e, init_seed)?,
        None => Classifier::new(cfg, init_seed)?,
    };
    let max_len = model.config.max_len;
    let train_enc = encode_records(tokenizer, train_set, max_len);
    let valid_enc = encode_records(tokenizer, valid_set, max_len);
    let outcome = train(&mut model, &train_enc, &valid_enc, train_cfg)?;
    Ok((model, outcome.history))
}

/// Which stages were loaded from an earlier run rather than recomputed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageReuse {
    pub dataset: bool,
    pub tokenizer: bool,
    pub embeddings: bool,
    pub model: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_dir: PathBuf,
    pub row: ResultRow,
    pub confusion: ConfusionMatrix,
    pub report: Report,
    pub reused: StageReuse,
}

/// Runs every stage of `cfg`, reusing artifacts already present in its
/// run directory, and writes `report.csv` / `report.json` there.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let run_dir = cfg.run_dir();
    fs::create_dir_all(&run_dir).map_err(|e| Error::io(&run_dir, e))?;
    write_atomic(
        &run_dir.join("config.json"),
        serde_json::to_string_pretty(cfg).expect("config serializes").as_bytes(),
    )?;
    let mut reused = StageReuse::default();

    let files = DatasetFiles::in_dir(&run_dir.join("dataset"));
    if files.exist() {
        reused.dataset = true;
    } else {
        generate_dataset(&cfg.corpus, cfg.dataset.split(), cfg.seed, &run_dir.join("dataset"))?;
    }
    let train_set = read_dataset(&files.train)?;
    let valid_set = read_dataset(&files.valid)?;
    let test_set = read_dataset(&files.test)?;

    let tok_path = run_dir.join("tokenizer").join("tokenizer.json");
    let tokenizer = if tok_path.is_file() {
        reused.tokenizer = true;
        Tokenizer::load(&tok_path)?
    } else {
        let tok = match (&cfg.tokenizer.path, cfg.tokenizer.kind) {
            (Some(p), _) => Tokenizer::load(p)?,
            (None, TokenizerKind::Char) => Tokenizer::char_level(),
            (None, kind) => fit_tokenizer(
                kind,
                cfg.tokenizer.effective_vocab_size(),
                &read_dataset(&files.tokenizer_corpus)?,
            )?,
        };
        if tok.kind() != cfg.tokenizer.kind {
            return Err(config_error(
                "tokenizer.kind",
                format!("tokenizer file holds a {:?} tokenizer", tok.kind()),
            ));
        }
        tok.save(&tok_path)?;
        tok
    };

    let emb_path = run_dir.join("embeddings").join("embeddings.txt");
    let emb_seed = derive_seed(cfg.seed, EMBEDDING_STREAM);
    let embedding = match cfg.embeddings.source {
        EmbeddingSource::None => None,
        _ if emb_path.is_file() => {
            reused.embeddings = true;
            Some(load_embedding_file(&emb_path, tokenizer.vocab(), emb_seed)?)
        }
        EmbeddingSource::Glove => {
            let glove = cfg.embeddings.glove.to_glove_config(cfg.model.embed_dim, emb_seed);
            let m = fit_embeddings(&tokenizer, &read_dataset(&files.tokenizer_corpus)?, &glove)?;
            save_embedding_file(&emb_path, tokenizer.vocab(), &m)?;
            Some(m)
        }
        EmbeddingSource::File => {
            let path = cfg.embeddings.path.as_ref().expect("validated");
            let m = load_embedding_file(path, tokenizer.vocab(), emb_seed)?;
            save_embedding_file(&emb_path, tokenizer.vocab(), &m)?;
            Some(m)
        }
    };
    if let Some(m) = &embedding {
        if m.dim() != cfg.model.embed_dim {
            return Err(config_error(
                "model.embed_dim",
                format!("embedding vectors have dimension {}", m.dim()),
            ));
        }
    }

    let model_path = run_dir.join("model").join("model.bin");
    let model = if model_path.is_file() {
        reused.model = true;
        load_model(&model_path)?
    } else {
        let (model, history) = fit_classifier(
            cfg.model_config(tokenizer.vocab_size()),
            embedding.as_ref(),
            &tokenizer,
            &train_set,
            &valid_set,
            &cfg.train_config(),
            derive_seed(cfg.seed, MODEL_INIT_STREAM),
        )?;
        write_atomic(
            &run_dir.join("model").join("history.json"),
            serde_json::to_string_pretty(&history).expect("history serializes").as_bytes(),
        )?;
        save_model(&model, &model_path)?;
        model
    };

    let (confusion, row) = evaluate(&model, &tokenizer, &test_set, &cfg.model_name())?;
    let report = Report::new(std::slice::from_ref(&row))?;
    report.write(&run_dir, "report")?;
    Ok(RunOutcome {
        run_dir,
        row,
        confusion,
        report,
        reused,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: CipherLabel,
    pub probabilities: [f64; NUM_CLASSES],
}

/// Normalizes `text` like the corpus cleaner (without the length limits)
/// and returns the most probable class with the full distribution.
pub fn classify_text(model: &Classifier, tokenizer: &Tokenizer, text: &str) -> Result<Classification> {
    let clean = normalize_text(text);
    if clean.is_empty() {
        return Err(Error::EmptyAfterCleaning);
    }
    let enc = tokenizer.encode(&clean, model.config.max_len);
    let probs = model.forward(&[Sequence::new(&enc.ids, enc.len)], None)?;
    let mut probabilities = [0.0; NUM_CLASSES];
    for (dst, &p) in probabilities.iter_mut().zip(probs.row(0)) {
        *dst = p;
    }
    let best = crate::model::argmax_rows(&probs)[0];
    Ok(Classification {
        label: CipherLabel::from_index(best).expect("class index"),
        probabilities,
    })
}

pub fn classify(model_path: &Path, tokenizer_path: &Path, text: &str) -> Result<Classification> {
    let model = load_model(model_path)?;
    let tokenizer = Tokenizer::load(tokenizer_path)?;
    if tokenizer.vocab_size() != model.config.vocab_size {
        return Err(Error::Shape(format!(
            "tokenizer has {} tokens but the model expects {}",
            tokenizer.vocab_size(),
            model.config.vocab_size
        )));
    }
    classify_text(&model, &tokenizer, text)
}
