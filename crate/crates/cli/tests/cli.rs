use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cipher_id(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cipher-id"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = cipher_id(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn write_corpus(dir: &Path) {
    let words = [
        "the", "people", "of", "this", "nation", "have", "spoken", "and", "we", "shall", "listen", "to", "their",
        "voice", "congress", "must", "act", "now", "for", "our", "future",
    ];
    let lines: Vec<String> = (0..300)
        .map(|i| {
            let n = 4 + i % 7;
            (0..n).map(|k| words[(i * 7 + k * 3 + k * k) % words.len()]).collect::<Vec<_>>().join(" ")
        })
        .collect();
    fs::write(dir.join("corpus.txt"), lines.join(".\n")).unwrap();
}

#[test]
fn step_by_step_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_corpus(dir);
    ok(dir, &["generate", "--corpus", "corpus.txt", "--train", "60", "--valid", "24", "--test", "24", "--seed", "4", "--out", "data"]);
    let train = fs::read_to_string(dir.join("data/train.txt")).unwrap();
    assert_eq!(train.lines().count(), 60);

    ok(dir, &["train-tokenizer", "--kind", "bpe", "--vocab-size", "60", "--corpus", "data/tokenizer_corpus.txt", "--out", "bpe.json"]);
    ok(dir, &["train-embeddings", "--tokenizer", "bpe.json", "--corpus", "data/tokenizer_corpus.txt", "--dim", "6", "--epochs", "2", "--out", "vectors.txt"]);
    let log = ok(
        dir,
        &[
            "train", "--data", "data", "--tokenizer", "bpe.json", "--embeddings", "vectors.txt", "--frozen", "--hidden", "6",
            "--epochs", "2", "--batch-size", "16", "--out", "model.bin",
        ],
    );
    assert!(log.contains("epoch  2"));

    let table = ok(dir, &["evaluate", "--model", "model.bin", "--tokenizer", "bpe.json", "--data", "data/test.txt", "--out", "."]);
    assert!(table.contains("Avg Accuracy"));
    let csv = fs::read_to_string(dir.join("report.csv")).unwrap();
    assert!(csv.starts_with("model,level,subs,trans,t_rev,chr_s,w_rev,original,acc\nGRU GLOVE (pre),S,"));

    let label = ok(dir, &["classify", "--model", "model.bin", "--tokenizer", "bpe.json", "we shall act"]);
    assert_eq!(label.lines().count(), 7);

    let err = cipher_id(dir, &["classify", "--model", "model.bin", "--tokenizer", "bpe.json", "123 !!!"]);
    assert!(!err.status.success());
    assert!(String::from_utf8_lossy(&err.stderr).contains("error:"));
}

#[test]
fn run_from_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_corpus(dir);
    let config = r#"{
        "corpus": {"path": "corpus.txt"},
        "dataset": {"train": 48, "valid": 12, "test": 12},
        "tokenizer": {"kind": "char"},
        "model": {"cell": "lstm", "embed_dim": 4, "hidden_dim": 4, "head_dims": [8, 8], "max_len": 30},
        "train": {"epochs": 1, "batch_size": 16}
    }"#;
    fs::write(dir.join("exp.json"), config).unwrap();
    let out = ok(dir, &["run", "--config", "exp.json", "--out", "runs", "--seed", "2"]);
    assert!(out.contains("LSTM Character Level"));
    let runs: Vec<_> = fs::read_dir(dir.join("runs")).unwrap().collect();
    assert_eq!(runs.len(), 1);

    fs::write(dir.join("bad.json"), config.replace("\"lstm\"", "\"rnn\"")).unwrap();
    let bad = cipher_id(dir, &["run", "--config", "bad.json"]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("model.cell"));
}
