//! Merge-based subword training shared by BPE and WordPiece.
//!
//! Both trainers start from single-character symbols inside each word and
//! repeatedly merge one adjacent pair into a new symbol. They differ in the
//! symbol spelling and in how a pair is scored:
//!
//! * BPE marks the word end with a separate `</w>` symbol and scores a pair
//!   by its frequency.
//! * WordPiece prefixes non-initial symbols with `##` and scores a pair by
//!   `freq(ab) / (freq(a) * freq(b))`.
//!
//! Ties go to the lexicographically smallest `(left, right)` pair. Training
//! stops when the vocabulary is full or no pair occurs at least twice.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::{Tokenizer, TokenizerKind, Vocabulary, CONTINUATION, END_OF_WORD, PAD_TOKEN, UNK_TOKEN};
use crate::error::{Error, Result};

/// One training step: the merged pair and the score that selected it.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeStep {
    pub pair: (String, String),
    pub score: f64,
    pub frequency: u64,
}

/// Merges every left-to-right occurrence of `(a, b)` in `symbols`.
pub(crate) fn merge_symbols(symbols: &[String], a: &str, b: &str, merged: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && symbols[i] == a && symbols[i + 1] == b {
            out.push(merged.to_string());
            i += 2;
        } else {
            out.push(symbols[i].clone());
            i += 1;
        }
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Scheme {
    Bpe,
    WordPiece,
}

impl Scheme {
    fn initial_symbols(self, word: &str) -> Vec<String> {
        match self {
            Scheme::Bpe => {
                let mut s: Vec<String> = word.chars().map(String::from).collect();
                s.push(END_OF_WORD.to_string());
                s
            }
            Scheme::WordPiece => word
                .chars()
                .enumerate()
                .map(|(i, c)| if i == 0 { c.to_string() } else { format!("{CONTINUATION}{c}") })
                .collect(),
        }
    }

    fn merged(self, a: &str, b: &str) -> String {
        match self {
            Scheme::Bpe => format!("{a}{b}"),
            Scheme::WordPiece => format!("{a}{}", b.strip_prefix(CONTINUATION).unwrap_or(b)),
        }
    }

    /// Base alphabet: always `a`-`z` (and their continuation forms), plus any
    /// other character seen in the corpus.
    fn base_symbols(self, seen: &HashSet<char>) -> Vec<String> {
        let mut chars: Vec<char> = ('a'..='z').collect();
        let mut extra: Vec<char> = seen.iter().copied().filter(|c| !c.is_ascii_lowercase()).collect();
        extra.sort_unstable();
        chars.extend(extra);
        match self {
            Scheme::Bpe => std::iter::once(END_OF_WORD.to_string())
                .chain(chars.iter().map(|c| c.to_string()))
                .collect(),
            Scheme::WordPiece => chars
                .iter()
                .map(|c| c.to_string())
                .chain(chars.iter().map(|c| format!("{CONTINUATION}{c}")))
                .collect(),
        }
    }
}

struct Trainer {
    scheme: Scheme,
    names: Vec<String>,
    lookup: HashMap<String, u32>,
    words: Vec<(Vec<u32>, u64)>,
    pair_counts: HashMap<(u32, u32), u64>,
    symbol_counts: HashMap<u32, u64>,
    /// Words that contained a pair at some point; may be stale.
    pair_words: HashMap<(u32, u32), Vec<usize>>,
}

impl Trainer {
    fn new(scheme: Scheme, word_counts: BTreeMap<String, u64>) -> Self {
        let mut t = Trainer {
            scheme,
            names: Vec::new(),
            lookup: HashMap::new(),
            words: Vec::with_capacity(word_counts.len()),
            pair_counts: HashMap::new(),
            symbol_counts: HashMap::new(),
            pair_words: HashMap::new(),
        };
        for (word, count) in word_counts {
            let symbols: Vec<u32> = scheme
                .initial_symbols(&word)
                .into_iter()
                .map(|s| t.intern(s))
                .collect();
            t.words.push((symbols, count));
        }
        for w in 0..t.words.len() {
            t.add_word(w);
        }
        t
    }

    fn intern(&mut self, name: String) -> u32 {
        if let Some(&id) = self.lookup.get(&name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.lookup.insert(name.clone(), id);
        self.names.push(name);
        id
    }

    fn add_word(&mut self, w: usize) {
        let (symbols, count) = &self.words[w];
        for &s in symbols {
            *self.symbol_counts.entry(s).or_default() += count;
        }
        for pair in symbols.windows(2) {
            let key = (pair[0], pair[1]);
            *self.pair_counts.entry(key).or_default() += count;
            self.pair_words.entry(key).or_default().push(w);
        }
    }

    fn remove_word(&mut self, w: usize) {
        let (symbols, count) = &self.words[w];
        for &s in symbols {
            let c = self.symbol_counts.get_mut(&s).expect("counted symbol");
            *c -= count;
            if *c == 0 {
                self.symbol_counts.remove(&s);
            }
        }
        for pair in symbols.windows(2) {
            let key = (pair[0], pair[1]);
            let c = self.pair_counts.get_mut(&key).expect("counted pair");
            *c -= count;
            if *c == 0 {
                self.pair_counts.remove(&key);
            }
        }
    }

    fn score(&self, pair: (u32, u32), freq: u64) -> f64 {
        match self.scheme {
            Scheme::Bpe => freq as f64,
            Scheme::WordPiece => {
                let fa = self.symbol_counts[&pair.0] as f64;
                let fb = self.symbol_counts[&pair.1] as f64;
                freq as f64 / (fa * fb)
            }
        }
    }

    /// Highest-scoring pair that occurs at least twice.
    fn best_pair(&self) -> Option<((u32, u32), f64, u64)> {
        let mut best: Option<((u32, u32), f64, u64)> = None;
        for (&pair, &freq) in &self.pair_counts {
            if freq < 2 {
                continue;
            }
            let score = self.score(pair, freq);
            let better = match best {
                None => true,
                Some((bp, bs, _)) => {
                    score > bs
                        || (score == bs
                            && (self.names[pair.0 as usize].as_str(), self.names[pair.1 as usize].as_str())
                                < (self.names[bp.0 as usize].as_str(), self.names[bp.1 as usize].as_str()))
                }
            };
            if better {
                best = Some((pair, score, freq));
            }
        }
        best
    }

    fn apply_merge(&mut self, pair: (u32, u32)) -> u32 {
        let merged = self
            .scheme
            .merged(&self.names[pair.0 as usize], &self.names[pair.1 as usize]);
        let new_id = self.intern(merged);
        let mut affected = self.pair_words.remove(&pair).unwrap_or_default();
        affected.sort_unstable();
        affected.dedup();
        for w in affected {
            if !self.words[w].0.windows(2).any(|p| (p[0], p[1]) == pair) {
                continue;
            }
            self.remove_word(w);
            let symbols = &self.words[w].0;
            let mut out = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && (symbols[i], symbols[i + 1]) == pair {
                    out.push(new_id);
                    i += 2;
                } else {
                    out.push(symbols[i]);
                    i += 1;
                }
            }
            self.words[w].0 = out;
            self.add_word(w);
        }
        new_id
    }
}

fn count_words<'a, I>(corpus: I) -> Result<(BTreeMap<String, u64>, HashSet<char>)>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut seen = HashSet::new();
    for line in corpus {
        for word in line.split_whitespace() {
            seen.extend(word.chars());
            *counts.entry(word.to_string()).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    Ok((counts, seen))
}

fn train_merges<'a, I>(scheme: Scheme, corpus: I, vocab_size: usize) -> Result<(Tokenizer, Vec<MergeStep>)>
where
    I: IntoIterator<Item = &'a str>,
{
    let (counts, seen) = count_words(corpus)?;
    let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
    tokens.extend(scheme.base_symbols(&seen));
    let mut in_vocab: HashSet<String> = tokens.iter().cloned().collect();

    let mut trainer = Trainer::new(scheme, counts);
    let mut merges = Vec::new();
    let mut trace = Vec::new();
    while tokens.len() < vocab_size {
        let Some((pair, score, frequency)) = trainer.best_pair() else {
            break;
        };
        let a = trainer.names[pair.0 as usize].clone();
        let b = trainer.names[pair.1 as usize].clone();
        let new_id = trainer.apply_merge(pair);
        let merged = trainer.names[new_id as usize].clone();
        if in_vocab.insert(merged.clone()) {
            tokens.push(merged);
        }
        trace.push(MergeStep {
            pair: (a.clone(), b.clone()),
            score,
            frequency,
        });
        merges.push((a, b));
    }

    let kind = match scheme {
        Scheme::Bpe => TokenizerKind::Bpe,
        Scheme::WordPiece => TokenizerKind::WordPiece,
    };
    let vocab = Vocabulary::from_tokens(tokens, true)?;
    Ok((Tokenizer::from_parts(kind, vocab, merges), trace))
}

/// Trains a BPE tokenizer with at most `vocab_size` entries (specials
/// included). The base alphabet is always kept, so smaller sizes simply
/// produce no merges.
pub fn train_bpe<'a, I>(corpus: I, vocab_size: usize) -> Result<Tokenizer>
where
    I: IntoIterator<Item = &'a str>,
{
    train_merges(Scheme::Bpe, corpus, vocab_size).map(|(t, _)| t)
}

/// As [`train_bpe`], also returning every merge step with its frequency.
pub fn train_bpe_traced<'a, I>(corpus: I, vocab_size: usize) -> Result<(Tokenizer, Vec<MergeStep>)>
where
    I: IntoIterator<Item = &'a str>,
{
    train_merges(Scheme::Bpe, corpus, vocab_size)
}

pub fn train_wordpiece<'a, I>(corpus: I, vocab_size: usize) -> Result<Tokenizer>
where
    I: IntoIterator<Item = &'a str>,
{
    train_merges(Scheme::WordPiece, corpus, vocab_size).map(|(t, _)| t)
}

pub fn train_wordpiece_traced<'a, I>(corpus: I, vocab_size: usize) -> Result<(Tokenizer, Vec<MergeStep>)>
where
    I: IntoIterator<Item = &'a str>,
{
    train_merges(Scheme::WordPiece, corpus, vocab_size)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_bpe_merge_on_tiny_corpus() {
        // Pair counts for "aaab aaab": (a,a)=4, (a,b)=2, (b,</w>)=2.
        let (_, trace) = train_bpe_traced(["aaab aaab"], 40).unwrap();
        assert_eq!(trace[0].pair, ("a".to_string(), "a".to_string()));
        assert_eq!(trace[0].frequency, 4);
    }

    #[test]
    fn base_size_means_no_merges() {
        let t = train_bpe(["the cat sat on the mat"], 29).unwrap();
        assert_eq!(t.vocab_size(), 29);
        assert!(t.merges().is_empty());
        let pieces = t.bpe_pieces("cat");
        assert_eq!(pieces, ["c", "a", "t", "</w>"]);
        assert_eq!(t.decode(&t.tokenize("the cat")), "the cat");
    }

    #[test]
    fn merge_symbols_is_left_to_right() {
        let s: Vec<String> = ["a", "a", "a"].map(String::from).to_vec();
        assert_eq!(merge_symbols(&s, "a", "a", "aa"), ["aa", "a"]);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(train_bpe(["", "  "], 100), Err(Error::EmptyCorpus)));
        assert!(matches!(train_wordpiece(Vec::<&str>::new(), 100), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn wordpiece_prefers_rare_exclusive_pair() {
        // "q" is always followed by "u": 2/(2*2) = 0.5. The most frequent
        // pair (##e,##s) scores 7/(12*7) ≈ 0.083.
        let corpus = ["quiz", "quota", "trees", "trees", "trees", "xees", "xees", "ees", "ees"];
        let (_, trace) = train_wordpiece_traced(corpus, 60).unwrap();
        assert_eq!(trace[0].pair, ("q".to_string(), "##u".to_string()));
    }

    #[test]
    fn wordpiece_round_trips_training_words() {
        let corpus = ["the quick brown fox", "jumps over the lazy dog", "the end"];
        let t = train_wordpiece(corpus, 80).unwrap();
        for line in corpus {
            assert_eq!(t.decode(&t.tokenize(line)), line);
        }
        assert_eq!(t.tokenize("the1"), vec![1]);
    }
}
