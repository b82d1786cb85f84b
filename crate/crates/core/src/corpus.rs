//! Corpus cleaning, round-robin dataset construction and the labeled text
//! file format.
//!
//! A dataset file is UTF-8 with LF line endings. Each line is the label
//! digit (`0`-`5`) immediately followed by the text, with no separator:
//!
//! ```text
//! 5the senate adjourned
//! 2denruojda etanes eht
//! ```

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::cipher::{encipher, CipherLabel, Plaintext, MAX_TEXT_LEN, MIN_TEXT_LEN, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::rng::RandomSource;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabeledRecord {
    pub label: CipherLabel,
    pub text: String,
}

impl LabeledRecord {
    pub fn new(label: CipherLabel, text: impl Into<String>) -> Self {
        LabeledRecord {
            label,
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl SplitSpec {
    pub fn new(train: usize, valid: usize, test: usize) -> Self {
        SplitSpec { train, valid, test }
    }

    pub fn total(&self) -> usize {
        self.train + self.valid + self.test
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LengthWindow {
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for LengthWindow {
    fn default() -> Self {
        LengthWindow {
            min_len: MIN_TEXT_LEN,
            max_len: MAX_TEXT_LEN,
        }
    }
}

/// Lowercases, keeps only whitespace-delimited tokens made entirely of
/// `a`-`z`, and joins them with single spaces. No length filtering.
pub fn normalize_text(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    let mut out = String::with_capacity(lowered.len());
    for token in lowered.split_whitespace() {
        if token.bytes().all(|b| b.is_ascii_lowercase()) {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(token);
        }
    }
    out
}

/// Cleans one raw corpus line with the default `[7, 443]` length window.
pub fn clean_line(raw: &str) -> Option<Plaintext> {
    clean_line_within(raw, LengthWindow::default())
}

pub fn clean_line_within(raw: &str, window: LengthWindow) -> Option<Plaintext> {
    let text = normalize_text(raw);
    if text.is_empty() || text.len() < window.min_len || text.len() > window.max_len {
        return None;
    }
    Some(Plaintext::new_unchecked(text))
}

fn open_text(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader: Box<dyn Read> = if path.extension().is_some_and(|e| e == "gz") {
        Box::new(GzDecoder::new(file))
    } else {
        Box::new(file)
    };
    Ok(Box::new(BufReader::new(reader)))
}

/// Reads a raw corpus (one document per line; `.gz` files are decompressed)
/// and returns the lines that survive cleaning, in file order.
pub fn load_clean_corpus(path: &Path, window: LengthWindow) -> Result<Vec<Plaintext>> {
    let mut reader = open_text(path)?;
    let mut out = Vec::new();
    let mut buf = Vec::new();
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        let line = String::from_utf8_lossy(&buf);
        if let Some(p) = clean_line_within(&line, window) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Counts of source lines that were dropped while building a split.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipStats {
    /// Lines for which the cipher raised an uncipherable-input error.
    pub uncipherable: [usize; NUM_CLASSES],
    /// Lines whose ciphertext equalled the plaintext.
    pub unchanged: [usize; NUM_CLASSES],
}

impl SkipStats {
    pub fn total(&self) -> usize {
        self.uncipherable.iter().sum::<usize>() + self.unchanged.iter().sum::<usize>()
    }
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub train: Vec<LabeledRecord>,
    pub valid: Vec<LabeledRecord>,
    pub test: Vec<LabeledRecord>,
    /// Shuffled source lines not consumed by any split.
    pub remainder: Vec<Plaintext>,
    pub skipped: SkipStats,
}

/// Enciphers lines from `source` with labels cycling 0..5 until `count`
/// records exist. A line that cannot be enciphered (or comes out unchanged)
/// is skipped and the same label moves on to the next line.
fn round_robin<'a, I>(
    source: &mut I,
    count: Option<usize>,
    rng: &mut RandomSource,
    skipped: &mut SkipStats,
) -> Result<Vec<LabeledRecord>>
where
    I: Iterator<Item = &'a Plaintext>,
{
    let mut out = Vec::with_capacity(count.unwrap_or(0));
    let mut label = CipherLabel::Substitution;
    while count.is_none_or(|n| out.len() < n) {
        let Some(p) = source.next() else {
            match count {
                Some(n) => {
                    return Err(Error::InsufficientCorpus {
                        needed: n,
                        available: out.len(),
                    })
                }
                None => break,
            }
        };
        match encipher(p.as_str(), label, rng) {
            Ok(ct) if label != CipherLabel::Unencrypted && ct == p.as_str() => {
                skipped.unchanged[label.index()] += 1;
            }
            Ok(ct) => {
                out.push(LabeledRecord::new(label, ct));
                label = label.next();
            }
            Err(Error::Uncipherable { .. }) => {
                skipped.uncipherable[label.index()] += 1;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Shuffles the corpus, then fills the train, valid and test splits in that
/// order from disjoint source lines with round-robin labels.
pub fn build_dataset(corpus: &[Plaintext], spec: SplitSpec, rng: &mut RandomSource) -> Result<Dataset> {
    let mut order: Vec<&Plaintext> = corpus.iter().collect();
    order.shuffle(rng);
    let mut source = order.into_iter();
    let mut skipped = SkipStats::default();
    let mut splits = Vec::with_capacity(3);
    let mut produced = 0;
    for count in [spec.train, spec.valid, spec.test] {
        let split = round_robin(&mut source, Some(count), rng, &mut skipped).map_err(|e| match e {
            Error::InsufficientCorpus { available, .. } => Error::InsufficientCorpus {
                needed: spec.total(),
                available: produced + available,
            },
            other => other,
        })?;
        produced += split.len();
        splits.push(split);
    }
    let test = splits.pop().unwrap_or_default();
    let valid = splits.pop().unwrap_or_default();
    let train = splits.pop().unwrap_or_default();
    Ok(Dataset {
        train,
        valid,
        test,
        remainder: source.cloned().collect(),
        skipped,
    })
}

/// Enciphers every line of `lines` in round-robin label order, skipping
/// lines that cannot carry their pending label.
pub fn encipher_round_robin(lines: &[Plaintext], rng: &mut RandomSource) -> Result<(Vec<LabeledRecord>, SkipStats)> {
    let mut skipped = SkipStats::default();
    let records = round_robin(&mut lines.iter(), None, rng, &mut skipped)?;
    Ok((records, skipped))
}

pub fn class_counts(records: &[LabeledRecord]) -> [usize; NUM_CLASSES] {
    let mut counts = [0; NUM_CLASSES];
    for r in records {
        counts[r.label.index()] += 1;
    }
    counts
}

/// Serializes records to the dataset line format.
pub fn format_dataset(records: &[LabeledRecord]) -> String {
    let mut out = String::with_capacity(records.iter().map(|r| r.text.len() + 2).sum());
    for r in records {
        out.push((b'0' + r.label.code()) as char);
        out.push_str(&r.text);
        out.push('\n');
    }
    out
}

pub fn write_dataset(records: &[LabeledRecord], path: &Path) -> Result<()> {
    write_atomic(path, format_dataset(records).as_bytes())
}

/// Parses the dataset line format. `source_name` is used in error messages.
pub fn parse_dataset(content: &str, source_name: &str) -> Result<Vec<LabeledRecord>> {
    let mut out = Vec::new();
    for (i, line) in content.split_terminator('\n').enumerate() {
        let lineno = i + 1;
        let mut chars = line.chars();
        let label = chars
            .next()
            .and_then(|c| c.to_digit(10))
            .and_then(|d| CipherLabel::from_code(d as u8))
            .ok_or_else(|| Error::format(source_name, Some(lineno), "line must start with a label digit 0-5"))?;
        let text = chars.as_str();
        if let Some(bad) = text.chars().find(|&c| c != ' ' && !c.is_ascii_lowercase()) {
            return Err(Error::format(
                source_name,
                Some(lineno),
                format!("unexpected character {bad:?} in text"),
            ));
        }
        out.push(LabeledRecord::new(label, text));
    }
    Ok(out)
}

pub fn read_dataset(path: &Path) -> Result<Vec<LabeledRecord>> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&content, &path.display().to_string())
}

/// Writes through a temporary sibling file and renames it into place.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn p(s: &str) -> Plaintext {
        Plaintext::new(s).unwrap()
    }

    #[test]
    fn cleaning_examples() {
        assert_eq!(
            clean_line("Hello, World café here").unwrap().as_str(),
            "world here"
        );
        assert!(clean_line("AB CD").is_none());
        assert!(clean_line(&"a".repeat(500)).is_none());
        assert!(clean_line("!!! ???").is_none());
        assert_eq!(
            clean_line("  The\tSenate   ADJOURNED  ").unwrap().as_str(),
            "the senate adjourned"
        );
        assert_eq!(normalize_text("Hi"), "hi");
    }

    #[test]
    fn empty_spec_gives_empty_splits() {
        let corpus = vec![p("some words here"); 3];
        let ds = build_dataset(&corpus, SplitSpec::new(0, 0, 0), &mut seeded(1)).unwrap();
        assert!(ds.train.is_empty() && ds.valid.is_empty() && ds.test.is_empty());
        assert_eq!(ds.remainder.len(), 3);
    }

    #[test]
    fn twelve_records_two_per_class() {
        let corpus: Vec<Plaintext> = (0..100)
            .map(|i| p(&format!("line number {} of the corpus", "abcdefghij".repeat(1 + i % 3))))
            .collect();
        let ds = build_dataset(&corpus, SplitSpec::new(12, 0, 0), &mut seeded(7)).unwrap();
        assert_eq!(ds.train.len(), 12);
        // Brute-force count of labels in the output.
        for label in CipherLabel::ALL {
            assert_eq!(ds.train.iter().filter(|r| r.label == label).count(), 2);
        }
        assert_eq!(ds.remainder.len(), 100 - 12 - ds.skipped.total());
    }

    #[test]
    fn uncipherable_lines_are_skipped_without_breaking_balance() {
        // Palindromes reverse onto themselves; "aaaaaaa" cannot be transposed.
        let mut corpus = vec![p("aaaaaaa"); 30];
        corpus.extend((0..30).map(|_| p("abc def ghi")));
        corpus.extend((0..30).map(|_| p("racecar")));
        let ds = build_dataset(&corpus, SplitSpec::new(18, 6, 6), &mut seeded(3)).unwrap();
        for split in [&ds.train, &ds.valid, &ds.test] {
            let counts = class_counts(split);
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            assert!(hi - lo <= 1, "{counts:?}");
            for r in split.iter() {
                if r.label != CipherLabel::Unencrypted {
                    assert!(!["aaaaaaa", "abc def ghi", "racecar"].contains(&r.text.as_str()));
                }
            }
        }
        assert!(ds.skipped.total() > 0);
    }

    #[test]
    fn insufficient_corpus() {
        let corpus = vec![p("abc def ghi"); 5];
        let err = build_dataset(&corpus, SplitSpec::new(4, 4, 0), &mut seeded(0)).unwrap_err();
        assert!(matches!(err, Error::InsufficientCorpus { needed: 8, .. }), "{err}");
    }

    #[test]
    fn parse_examples() {
        let recs = parse_dataset("5hello world\n0ifmmp\n", "mem").unwrap();
        assert_eq!(recs[0], LabeledRecord::new(CipherLabel::Unencrypted, "hello world"));
        assert_eq!(recs[1].label, CipherLabel::Substitution);
        let err = parse_dataset("5ok\n7abc\n", "mem").unwrap_err();
        assert!(matches!(err, Error::Format { line: Some(2), .. }), "{err}");
        assert!(parse_dataset("xabc\n", "mem").is_err());
        assert!(parse_dataset("1ABC\n", "mem").is_err());
    }

    #[test]
    fn write_is_idempotent_overwrite() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.txt");
        let recs = vec![LabeledRecord::new(CipherLabel::TextReversal, "olleh")];
        write_dataset(&recs, &path).unwrap();
        write_dataset(&recs, &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "2olleh\n");
        assert_eq!(read_dataset(&path).unwrap(), recs);
    }

    #[test]
    fn gz_corpus_loads() {
        use flate2::write::GzEncoder;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.txt.gz");
        let mut enc = GzEncoder::new(File::create(&path).unwrap(), flate2::Compression::fast());
        enc.write_all(b"The first line, here.\nno\nAnother plain line\n").unwrap();
        enc.finish().unwrap();
        let lines = load_clean_corpus(&path, LengthWindow::default()).unwrap();
        let texts: Vec<&str> = lines.iter().map(|p| p.as_str()).collect();
        assert_eq!(texts, ["the first", "another plain line"]);
    }
}
