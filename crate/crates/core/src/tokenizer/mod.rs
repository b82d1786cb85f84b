//! Character, word, BPE and WordPiece tokenizers behind one interface.
//!
//! Trained tokenizers are saved as JSON:
//!
//! ```json
//! {"kind":"bpe","vocab":["<pad>","<unk>","</w>","a",...],
//!  "merges":[["t","h"],["th","e</w>"]],"specials":{"pad":0,"unk":1}}
//! ```
//!
//! `vocab` is ordered by id. `merges` is present (possibly empty) only for
//! `bpe` and `wordpiece`. The character tokenizer has no unknown token.

mod merges;
mod word;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::write_atomic;
use crate::error::{Error, Result};

pub use merges::{train_bpe, train_bpe_traced, train_wordpiece, train_wordpiece_traced, MergeStep};
pub use word::train_word_tokenizer;

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const END_OF_WORD: &str = "</w>";
pub const CONTINUATION: &str = "##";
pub const PAD_ID: u32 = 0;

/// Default vocabulary size for BPE and WordPiece.
pub const DEFAULT_SUBWORD_VOCAB: usize = 8_000;
/// Default number of corpus words kept by the word tokenizer (specials extra).
pub const DEFAULT_WORD_VOCAB: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerKind {
    Char,
    Word,
    Bpe,
    #[serde(rename = "wordpiece")]
    WordPiece,
}

impl TokenizerKind {
    /// Default sequence cap used when encoding for the classifier.
    pub fn default_max_len(self) -> usize {
        match self {
            TokenizerKind::Char => 448,
            TokenizerKind::Word => 64,
            TokenizerKind::Bpe | TokenizerKind::WordPiece => 96,
        }
    }

    /// Level tag used in result tables: C, W or S (subword).
    pub fn level(self) -> char {
        match self {
            TokenizerKind::Char => 'C',
            TokenizerKind::Word => 'W',
            TokenizerKind::Bpe | TokenizerKind::WordPiece => 'S',
        }
    }
}

impl std::str::FromStr for TokenizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "char" => Ok(TokenizerKind::Char),
            "word" => Ok(TokenizerKind::Word),
            "bpe" => Ok(TokenizerKind::Bpe),
            "wordpiece" => Ok(TokenizerKind::WordPiece),
            other => Err(Error::InvalidArgument(format!("unknown tokenizer kind {other:?}"))),
        }
    }
}

/// Dense token ↔ id mapping. PAD is always id 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
    unk: Option<u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from tokens ordered by id. The first token must be
    /// the PAD token; `with_unk` expects the UNK token at id 1.
    pub fn from_tokens(tokens: Vec<String>, with_unk: bool) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(PAD_TOKEN) {
            return Err(Error::InvalidArgument("vocabulary must start with <pad>".into()));
        }
        if with_unk && tokens.get(1).map(String::as_str) != Some(UNK_TOKEN) {
            return Err(Error::InvalidArgument("vocabulary must have <unk> at id 1".into()));
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i as u32).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate token {t:?}")));
            }
        }
        Ok(Vocabulary {
            tokens,
            ids,
            unk: with_unk.then_some(1),
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn pad_id(&self) -> u32 {
        PAD_ID
    }

    pub fn unk_id(&self) -> Option<u32> {
        self.unk
    }

    fn id_or_unk(&self, token: &str) -> Option<u32> {
        self.id(token).or(self.unk)
    }
}

/// A fixed-length encoding: `ids` has exactly the requested length and
/// `len` counts the leading non-PAD positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoding {
    pub ids: Vec<u32>,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tokenizer {
    kind: TokenizerKind,
    vocab: Vocabulary,
    merges: Vec<(String, String)>,
    ranks: HashMap<(String, String), usize>,
}

impl Tokenizer {
    pub(crate) fn from_parts(kind: TokenizerKind, vocab: Vocabulary, merges: Vec<(String, String)>) -> Self {
        let ranks = merges
            .iter()
            .enumerate()
            .map(|(i, pair)| (pair.clone(), i))
            .collect();
        Tokenizer {
            kind,
            vocab,
            merges,
            ranks,
        }
    }

    /// The closed-form character tokenizer: PAD, space and `a`-`z`.
    pub fn char_level() -> Self {
        let mut tokens = vec![PAD_TOKEN.to_string(), " ".to_string()];
        tokens.extend(('a'..='z').map(String::from));
        let vocab = Vocabulary::from_tokens(tokens, false).expect("static vocabulary");
        Tokenizer::from_parts(TokenizerKind::Char, vocab, Vec::new())
    }

    pub fn kind(&self) -> TokenizerKind {
        self.kind
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    /// Tokenizes without truncation or padding.
    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        match self.kind {
            // Characters outside the closed alphabet are dropped.
            TokenizerKind::Char => text.chars().filter_map(|c| self.vocab.id(c.encode_utf8(&mut [0; 4]))).collect(),
            TokenizerKind::Word => text
                .split_whitespace()
                .filter_map(|w| self.vocab.id_or_unk(w))
                .collect(),
            TokenizerKind::Bpe => {
                let mut out = Vec::new();
                for word in text.split_whitespace() {
                    for piece in self.bpe_pieces(word) {
                        out.extend(self.vocab.id_or_unk(&piece));
                    }
                }
                out
            }
            TokenizerKind::WordPiece => {
                let mut out = Vec::new();
                for word in text.split_whitespace() {
                    self.wordpiece_ids(word, &mut out);
                }
                out
            }
        }
    }

    /// Tokenizes, truncates to `max_len` and right-pads with PAD.
    pub fn encode(&self, text: &str, max_len: usize) -> Encoding {
        let mut ids = self.tokenize(text);
        ids.truncate(max_len);
        let len = ids.len();
        ids.resize(max_len, PAD_ID);
        Encoding { ids, len }
    }

    /// Maps ids back to text. PAD ids are skipped.
    pub fn decode(&self, ids: &[u32]) -> String {
        let tokens = ids
            .iter()
            .filter(|&&id| id != PAD_ID)
            .map(|&id| self.vocab.token(id).unwrap_or(UNK_TOKEN));
        match self.kind {
            TokenizerKind::Char => tokens.collect(),
            TokenizerKind::Word => tokens.collect::<Vec<_>>().join(" "),
            TokenizerKind::Bpe => {
                let mut out = String::new();
                for t in tokens {
                    match t.strip_suffix(END_OF_WORD) {
                        Some(stem) => {
                            out.push_str(stem);
                            out.push(' ');
                        }
                        None => out.push_str(t),
                    }
                }
                out.trim_end().to_string()
            }
            TokenizerKind::WordPiece => {
                let mut out = String::new();
                for t in tokens {
                    match t.strip_prefix(CONTINUATION) {
                        Some(rest) => out.push_str(rest),
                        None => {
                            if !out.is_empty() {
                                out.push(' ');
                            }
                            out.push_str(t);
                        }
                    }
                }
                out
            }
        }
    }

    /// Segments one word by replaying merges in rank order.
    pub fn bpe_pieces(&self, word: &str) -> Vec<String> {
        let mut symbols: Vec<String> = word.chars().map(String::from).collect();
        symbols.push(END_OF_WORD.to_string());
        loop {
            let best = symbols
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0].clone(), w[1].clone())))
                .min()
                .copied();
            let Some(rank) = best else { break };
            let (a, b) = &self.merges[rank];
            symbols = merges::merge_symbols(&symbols, a, b, &format!("{a}{b}"));
        }
        symbols
    }

    fn wordpiece_ids(&self, word: &str, out: &mut Vec<u32>) {
        let chars: Vec<char> = word.chars().collect();
        let mut pieces = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let mut end = chars.len();
            let mut found = None;
            while end > start {
                let mut piece: String = chars[start..end].iter().collect();
                if start > 0 {
                    piece.insert_str(0, CONTINUATION);
                }
                if let Some(id) = self.vocab.id(&piece) {
                    found = Some(id);
                    break;
                }
                end -= 1;
            }
            match found {
                Some(id) => {
                    pieces.push(id);
                    start = end;
                }
                None => {
                    out.extend(self.vocab.unk_id());
                    return;
                }
            }
        }
        out.extend(pieces);
    }

    pub fn to_json(&self) -> String {
        let file = TokenizerFile {
            kind: self.kind,
            vocab: self.vocab.tokens.clone(),
            merges: matches!(self.kind, TokenizerKind::Bpe | TokenizerKind::WordPiece)
                .then(|| self.merges.clone()),
            specials: Specials {
                pad: PAD_ID,
                unk: self.vocab.unk,
            },
        };
        serde_json::to_string(&file).expect("tokenizer serializes")
    }

    pub fn from_json(json: &str, source_name: &str) -> Result<Self> {
        let file: TokenizerFile =
            serde_json::from_str(json).map_err(|e| Error::format(source_name, Some(e.line()), e.to_string()))?;
        let bad = |msg: &str| Error::format(source_name, None, msg);
        if file.specials.pad != PAD_ID {
            return Err(bad("specials.pad must be 0"));
        }
        let expects_unk = file.kind != TokenizerKind::Char;
        match (expects_unk, file.specials.unk) {
            (true, Some(1)) | (false, None) => {}
            _ => return Err(bad("specials.unk must be 1 (or null for char tokenizers)")),
        }
        let merges = match (file.kind, file.merges) {
            (TokenizerKind::Bpe | TokenizerKind::WordPiece, Some(m)) => m,
            (TokenizerKind::Bpe | TokenizerKind::WordPiece, None) => return Err(bad("missing merges")),
            (_, Some(_)) => return Err(bad("merges are only valid for bpe and wordpiece")),
            (_, None) => Vec::new(),
        };
        let vocab = Vocabulary::from_tokens(file.vocab, expects_unk).map_err(|e| bad(&e.to_string()))?;
        Ok(Tokenizer::from_parts(file.kind, vocab, merges))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Tokenizer::from_json(&json, &path.display().to_string())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TokenizerFile {
    kind: TokenizerKind,
    vocab: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    merges: Option<Vec<(String, String)>>,
    specials: Specials,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Specials {
    pad: u32,
    unk: Option<u32>,
}

/// Trains a tokenizer of `kind` on `corpus`. `vocab_size` is ignored for the
/// character tokenizer.
pub fn train_tokenizer<'a, I>(kind: TokenizerKind, corpus: I, vocab_size: usize) -> Result<Tokenizer>
where
    I: IntoIterator<Item = &'a str>,
{
    match kind {
        TokenizerKind::Char => Ok(Tokenizer::char_level()),
        TokenizerKind::Word => train_word_tokenizer(corpus, vocab_size),
        TokenizerKind::Bpe => train_bpe(corpus, vocab_size),
        TokenizerKind::WordPiece => train_wordpiece(corpus, vocab_size),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn char_tokenizer_has_28_entries() {
        let t = Tokenizer::char_level();
        assert_eq!(t.vocab_size(), 28);
        let id = |s: &str| t.vocab().id(s).unwrap();
        assert_eq!(t.tokenize("ab c"), vec![id("a"), id("b"), id(" "), id("c")]);
        assert_eq!(t.decode(&t.tokenize("the end is near")), "the end is near");
        assert_eq!(t.vocab().unk_id(), None);
    }

    #[test]
    fn encode_pads_and_truncates() {
        let t = Tokenizer::char_level();
        let e = t.encode("abc", 5);
        assert_eq!(e.len, 3);
        assert_eq!(e.ids.len(), 5);
        assert_eq!(&e.ids[3..], &[PAD_ID, PAD_ID]);
        let e = t.encode("abcdef", 4);
        assert_eq!((e.len, e.ids.len()), (4, 4));
        assert_eq!(t.decode(&e.ids), "abcd");
    }

    #[test]
    fn wordpiece_longest_match() {
        let tokens = ["<pad>", "<unk>", "ab", "a", "b", "##b"].map(String::from).to_vec();
        let t = Tokenizer::from_parts(
            TokenizerKind::WordPiece,
            Vocabulary::from_tokens(tokens, true).unwrap(),
            Vec::new(),
        );
        let ids = t.tokenize("abb");
        let pieces: Vec<&str> = ids.iter().map(|&i| t.vocab().token(i).unwrap()).collect();
        assert_eq!(pieces, ["ab", "##b"]);
        assert_eq!(t.tokenize("abz"), vec![1]);
        assert_eq!(t.tokenize("ab abb"), vec![2, 2, 5]);
        assert_eq!(t.decode(&[2, 2, 5]), "ab abb");
    }

    #[test]
    fn json_rejects_unknown_kind_and_bad_specials() {
        let err = Tokenizer::from_json(r#"{"kind":"sentencepiece","vocab":["<pad>"],"specials":{"pad":0,"unk":null}}"#, "t")
            .unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        let err = Tokenizer::from_json(r#"{"kind":"word","vocab":["<pad>","<unk>"],"specials":{"pad":0,"unk":null}}"#, "t")
            .unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        let err = Tokenizer::from_json(r#"{"kind":"bpe","vocab":["<pad>","<unk>"],"specials":{"pad":0,"unk":1}}"#, "t")
            .unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        let ok = Tokenizer::from_json(r#"{"kind":"word","vocab":["<pad>","<unk>","x"],"specials":{"pad":0,"unk":1}}"#, "t")
            .unwrap();
        assert_eq!(ok.tokenize("x y"), vec![2, 1]);
    }

    #[test]
    fn char_round_trip_through_json() {
        let t = Tokenizer::char_level();
        let back = Tokenizer::from_json(&t.to_json(), "t").unwrap();
        assert_eq!(back, t);
    }
}
