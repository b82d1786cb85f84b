use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cipher_id::corpus::{read_dataset, SplitSpec};
use cipher_id::embedding::{load_embedding_file, save_embedding_file, GloveConfig};
use cipher_id::experiment::{
    classify, fit_classifier, fit_embeddings, fit_tokenizer, generate_dataset, model_name, run_experiment,
    CorpusConfig, DatasetFiles, EmbeddingSource, ExperimentConfig, EMBEDDING_STREAM, MODEL_INIT_STREAM, TRAIN_STREAM,
};
use cipher_id::metrics::evaluate;
use cipher_id::model::{load_model, save_model, CellType, EmbeddingMode, ModelConfig, TrainConfig};
use cipher_id::report::Report;
use cipher_id::rng::derive_seed;
use cipher_id::tokenizer::{Tokenizer, TokenizerKind, DEFAULT_SUBWORD_VOCAB, DEFAULT_WORD_VOCAB};
use cipher_id::{CipherLabel, Error, Result};

#[derive(Parser)]
#[command(name = "cipher-id", version, about = "Generate cipher datasets and train cipher-type classifiers")]
struct Cli {
    /// Seed for every random choice (default 0; overrides the config seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment config (JSON) for `run`.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory of the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean a corpus and write train/valid/test/tokenizer_corpus files.
    Generate(GenerateArgs),
    /// Train a tokenizer on the texts of a dataset file.
    TrainTokenizer(TrainTokenizerArgs),
    /// Train GloVe vectors for a tokenizer's vocabulary.
    TrainEmbeddings(TrainEmbeddingsArgs),
    /// Train a classifier on a generated dataset directory.
    Train(TrainArgs),
    /// Evaluate a model on a dataset file and write a report.
    Evaluate(EvaluateArgs),
    /// Print the predicted class and probabilities for one text.
    Classify(ClassifyArgs),
    /// Run a full experiment from `--config`.
    Run,
}

#[derive(Args)]
struct GenerateArgs {
    /// Raw corpus, one document per line (`.gz` accepted).
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    train: usize,
    #[arg(long)]
    valid: usize,
    #[arg(long)]
    test: usize,
    #[arg(long, default_value_t = 7)]
    min_len: usize,
    #[arg(long, default_value_t = 443)]
    max_len: usize,
}

#[derive(Args)]
struct TrainTokenizerArgs {
    /// char, word, bpe or wordpiece.
    #[arg(long)]
    kind: TokenizerKind,
    #[arg(long)]
    vocab_size: Option<usize>,
    /// Dataset file whose texts are the training corpus.
    #[arg(long)]
    corpus: PathBuf,
}

#[derive(Args)]
struct TrainEmbeddingsArgs {
    #[arg(long)]
    tokenizer: PathBuf,
    /// Dataset file whose texts are the training corpus.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = 300)]
    dim: usize,
    #[arg(long, default_value_t = 25)]
    epochs: usize,
    #[arg(long, default_value_t = 10)]
    window: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory written by `generate`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    tokenizer: PathBuf,
    /// gru or lstm.
    #[arg(long, default_value = "gru")]
    cell: String,
    /// Embedding file to start from.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Keep the loaded embeddings fixed.
    #[arg(long, requires = "embeddings")]
    frozen: bool,
    #[arg(long, default_value_t = 300)]
    embed_dim: usize,
    #[arg(long, default_value_t = 256)]
    hidden: usize,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 1024)]
    batch_size: usize,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    tokenizer: PathBuf,
    /// Labeled dataset file.
    #[arg(long)]
    data: PathBuf,
    /// Row label in the report.
    #[arg(long)]
    name: Option<String>,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    tokenizer: PathBuf,
    text: String,
}

fn out_or(cli_out: &Option<PathBuf>, default: &str) -> PathBuf {
    cli_out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn parse_cell(s: &str) -> Result<CellType> {
    match s.to_ascii_lowercase().as_str() {
        "gru" => Ok(CellType::Gru),
        "lstm" => Ok(CellType::Lstm),
        other => Err(Error::InvalidArgument(format!("unknown cell type `{other}` (expected gru or lstm)"))),
    }
}

fn execute(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Generate(a) => {
            let dir = out_or(&cli.out, "dataset");
            let corpus = CorpusConfig {
                path: a.corpus,
                min_len: a.min_len,
                max_len: a.max_len,
            };
            let files = generate_dataset(&corpus, SplitSpec::new(a.train, a.valid, a.test), seed, &dir)?;
            println!("wrote {}", files.train.parent().unwrap_or(Path::new(".")).display());
        }
        Command::TrainTokenizer(a) => {
            let out = out_or(&cli.out, "tokenizer.json");
            let vocab_size = a.vocab_size.unwrap_or(match a.kind {
                TokenizerKind::Word => DEFAULT_WORD_VOCAB,
                _ => DEFAULT_SUBWORD_VOCAB,
            });
            let tok = match a.kind {
                TokenizerKind::Char => Tokenizer::char_level(),
                kind => fit_tokenizer(kind, vocab_size, &read_dataset(&a.corpus)?)?,
            };
            tok.save(&out)?;
            println!("wrote {} ({} tokens)", out.display(), tok.vocab_size());
        }
        Command::TrainEmbeddings(a) => {
            let out = out_or(&cli.out, "embeddings.txt");
            let tok = Tokenizer::load(&a.tokenizer)?;
            let glove = GloveConfig {
                dim: a.dim,
                epochs: a.epochs,
                window: a.window,
                seed,
                ..GloveConfig::default()
            };
            let m = fit_embeddings(&tok, &read_dataset(&a.corpus)?, &glove)?;
            save_embedding_file(&out, tok.vocab(), &m)?;
            println!("wrote {}", out.display());
        }
        Command::Train(a) => {
            let out = out_or(&cli.out, "model.bin");
            let tok = Tokenizer::load(&a.tokenizer)?;
            let files = DatasetFiles::in_dir(&a.data);
            let embedding = a
                .embeddings
                .as_ref()
                .map(|p| load_embedding_file(p, tok.vocab(), derive_seed(seed, EMBEDDING_STREAM)))
                .transpose()?;
            let max_len = a.max_len.unwrap_or(tok.kind().default_max_len());
            let mut cfg = ModelConfig::new(parse_cell(&a.cell)?, tok.vocab_size(), max_len);
            cfg.hidden_dim = a.hidden;
            cfg.embed_dim = embedding.as_ref().map_or(a.embed_dim, |e| e.dim());
            cfg.embedding_mode = match (&embedding, a.frozen) {
                (None, _) => EmbeddingMode::Learned,
                (Some(_), true) => EmbeddingMode::FrozenPretrained,
                (Some(_), false) => EmbeddingMode::GloveInitialized,
            };
            let train_cfg = TrainConfig {
                epochs: a.epochs,
                lr: a.lr,
                batch_size: a.batch_size,
                seed: derive_seed(seed, TRAIN_STREAM),
            };
            let (model, history) = fit_classifier(
                cfg,
                embedding.as_ref(),
                &tok,
                &read_dataset(&files.train)?,
                &read_dataset(&files.valid)?,
                &train_cfg,
                derive_seed(seed, MODEL_INIT_STREAM),
            )?;
            for e in &history {
                println!(
                    "epoch {:>2}  loss {:.4}  train acc {:.4}  valid acc {:.4}",
                    e.epoch, e.train_loss, e.train_accuracy, e.valid_accuracy
                );
            }
            save_model(&model, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Evaluate(a) => {
            let dir = out_or(&cli.out, ".");
            let model = load_model(&a.model)?;
            let tok = Tokenizer::load(&a.tokenizer)?;
            let name = a
                .name
                .unwrap_or_else(|| {
                    let source = match model.config.embedding_mode {
                        EmbeddingMode::Learned => EmbeddingSource::None,
                        _ => EmbeddingSource::File,
                    };
                    model_name(model.config.cell, tok.kind(), source, false)
                });
            let (_, row) = evaluate(&model, &tok, &read_dataset(&a.data)?, &name)?;
            let report = Report::new(&[row])?;
            report.write(&dir, "report")?;
            print!("{}", report.to_text());
        }
        Command::Classify(a) => {
            let c = classify(&a.model, &a.tokenizer, &a.text)?;
            println!("{} ({})", c.label, c.label.code());
            for (label, p) in CipherLabel::ALL.iter().zip(c.probabilities) {
                println!("  {:<16} {p:.4}", label.to_string());
            }
        }
        Command::Run => {
            let path = cli
                .config
                .ok_or_else(|| Error::InvalidArgument("`run` needs --config <file>".into()))?;
            let mut cfg = ExperimentConfig::load(&path)?;
            if let Some(out) = cli.out {
                cfg.output.dir = out;
            }
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let outcome = run_experiment(&cfg)?;
            print!("{}", outcome.report.to_text());
            println!("artifacts in {}", outcome.run_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
