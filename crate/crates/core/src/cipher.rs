//! The five text transformations and the unencrypted identity class.
//!
//! All functions operate on text over the cleaned alphabet (`a`-`z` and a
//! single space between words). Spaces keep their positions under every
//! transformation except text reversal.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// Default lower bound on plaintext length, in characters.
pub const MIN_TEXT_LEN: usize = 7;
/// Default upper bound on plaintext length, in characters.
pub const MAX_TEXT_LEN: usize = 443;

/// Number of classes (five ciphers plus unencrypted text).
pub const NUM_CLASSES: usize = 6;

const TRANSPOSITION_RETRIES: usize = 64;
const SUBSTITUTION_RETRIES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CipherLabel {
    Substitution = 0,
    Transposition = 1,
    TextReversal = 2,
    CharacterShift = 3,
    WordReversal = 4,
    Unencrypted = 5,
}

impl CipherLabel {
    pub const ALL: [CipherLabel; NUM_CLASSES] = [
        CipherLabel::Substitution,
        CipherLabel::Transposition,
        CipherLabel::TextReversal,
        CipherLabel::CharacterShift,
        CipherLabel::WordReversal,
        CipherLabel::Unencrypted,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }

    /// The label that follows this one in the round-robin order.
    pub fn next(self) -> Self {
        Self::ALL[(self.index() + 1) % NUM_CLASSES]
    }

    pub fn name(self) -> &'static str {
        match self {
            CipherLabel::Substitution => "Substitution",
            CipherLabel::Transposition => "Transposition",
            CipherLabel::TextReversal => "Text Reversal",
            CipherLabel::CharacterShift => "Character Shift",
            CipherLabel::WordReversal => "Word Reversal",
            CipherLabel::Unencrypted => "Unencrypted",
        }
    }

    /// Report column key.
    pub fn column(self) -> &'static str {
        match self {
            CipherLabel::Substitution => "subs",
            CipherLabel::Transposition => "trans",
            CipherLabel::TextReversal => "t_rev",
            CipherLabel::CharacterShift => "chr_s",
            CipherLabel::WordReversal => "w_rev",
            CipherLabel::Unencrypted => "original",
        }
    }
}

impl fmt::Display for CipherLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Cleaned text: lowercase ASCII words separated by single spaces, with a
/// length inside the configured window.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Plaintext(String);

impl Plaintext {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        Self::with_bounds(text, MIN_TEXT_LEN, MAX_TEXT_LEN)
    }

    pub fn with_bounds(text: impl Into<String>, min_len: usize, max_len: usize) -> Result<Self> {
        let text = text.into();
        if let Some(problem) = alphabet_problem(&text) {
            return Err(Error::InvalidArgument(format!("not cleaned text ({problem}): {text:?}")));
        }
        let n = text.len();
        if n < min_len || n > max_len {
            return Err(Error::InvalidArgument(format!(
                "length {n} outside [{min_len}, {max_len}]"
            )));
        }
        Ok(Plaintext(text))
    }

    /// Wraps text already known to be clean.
    pub(crate) fn new_unchecked(text: String) -> Self {
        Plaintext(text)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl AsRef<str> for Plaintext {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Plaintext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn alphabet_problem(text: &str) -> Option<&'static str> {
    if text.bytes().any(|b| b != b' ' && !b.is_ascii_lowercase()) {
        return Some("character outside a-z and space");
    }
    if text.starts_with(' ') || text.ends_with(' ') {
        return Some("leading or trailing space");
    }
    if text.contains("  ") {
        return Some("consecutive spaces");
    }
    None
}

/// A derangement of `a`-`z`: a bijection with no fixed letter.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SubstitutionKey {
    mapping: [u8; 26],
}

impl SubstitutionKey {
    /// Builds a key from the 26 image letters of `a`..`z`. Fails unless the
    /// mapping is a permutation without fixed points.
    pub fn from_letters(images: &str) -> Result<Self> {
        let bytes = images.as_bytes();
        if bytes.len() != 26 || !bytes.iter().all(u8::is_ascii_lowercase) {
            return Err(Error::InvalidArgument("key needs 26 lowercase letters".into()));
        }
        let mut mapping = [0u8; 26];
        let mut seen = [false; 26];
        for (i, &b) in bytes.iter().enumerate() {
            let j = b - b'a';
            if seen[j as usize] {
                return Err(Error::InvalidArgument(format!("letter {} used twice", b as char)));
            }
            if j as usize == i {
                return Err(Error::InvalidArgument(format!("letter {} maps to itself", b as char)));
            }
            seen[j as usize] = true;
            mapping[i] = j;
        }
        Ok(SubstitutionKey { mapping })
    }

    pub fn map(&self, c: char) -> char {
        if c.is_ascii_lowercase() {
            (b'a' + self.mapping[(c as u8 - b'a') as usize]) as char
        } else {
            c
        }
    }

    pub fn inverse(&self) -> SubstitutionKey {
        let mut mapping = [0u8; 26];
        for (i, &j) in self.mapping.iter().enumerate() {
            mapping[j as usize] = i as u8;
        }
        SubstitutionKey { mapping }
    }

    pub fn letters(&self) -> String {
        self.mapping.iter().map(|&j| (b'a' + j) as char).collect()
    }
}

/// Rejection-samples uniform permutations of the alphabet until one is a
/// derangement (about e ≈ 2.72 draws on average).
pub fn generate_substitution_key(rng: &mut RandomSource) -> SubstitutionKey {
    let mut perm: [u8; 26] = std::array::from_fn(|i| i as u8);
    for _ in 0..SUBSTITUTION_RETRIES {
        perm.shuffle(rng);
        if perm.iter().enumerate().all(|(i, &j)| i as u8 != j) {
            return SubstitutionKey { mapping: perm };
        }
    }
    // Probability of reaching this point is (1 - 1/e)^10000.
    unreachable!("no derangement found")
}

pub fn apply_substitution(text: &str, key: &SubstitutionKey) -> String {
    text.chars().map(|c| key.map(c)).collect()
}

/// Permutes the non-space characters uniformly at random, keeping spaces in
/// place, and redraws until the result differs from the input.
pub fn apply_transposition(text: &str, rng: &mut RandomSource) -> Result<String> {
    let chars: Vec<char> = text.chars().collect();
    let slots: Vec<usize> = (0..chars.len()).filter(|&i| chars[i] != ' ').collect();
    let letters: Vec<char> = slots.iter().map(|&i| chars[i]).collect();
    if letters.len() < 2 {
        return Err(Error::Uncipherable {
            label: CipherLabel::Transposition,
            reason: "fewer than two non-space characters",
        });
    }
    if letters.iter().all(|&c| c == letters[0]) {
        return Err(Error::Uncipherable {
            label: CipherLabel::Transposition,
            reason: "all non-space characters are identical",
        });
    }
    let mut shuffled = letters.clone();
    for _ in 0..TRANSPOSITION_RETRIES {
        shuffled.shuffle(rng);
        if shuffled != letters {
            let mut out = chars.clone();
            for (&slot, &c) in slots.iter().zip(&shuffled) {
                out[slot] = c;
            }
            return Ok(out.into_iter().collect());
        }
    }
    Err(Error::Uncipherable {
        label: CipherLabel::Transposition,
        reason: "every sampled permutation reproduced the input",
    })
}

/// Reverses every space-delimited word in place.
pub fn apply_word_reversal(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for (i, word) in text.split(' ').enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.extend(word.chars().rev());
    }
    out
}

/// Reverses the whole character sequence, spaces included.
pub fn apply_text_reversal(text: &str) -> String {
    text.chars().rev().collect()
}

/// Rotates the non-space characters right by `offset` positions and writes
/// them back into the non-space slots.
///
/// `"ab cd"` with offset 1 becomes `"da bc"`.
pub fn rotate_non_space(text: &str, offset: usize) -> String {
    let mut chars: Vec<char> = text.chars().collect();
    let slots: Vec<usize> = (0..chars.len()).filter(|&i| chars[i] != ' ').collect();
    if slots.is_empty() {
        return text.to_string();
    }
    let mut letters: Vec<char> = slots.iter().map(|&i| chars[i]).collect();
    let m = letters.len();
    letters.rotate_right(offset % m);
    for (&slot, c) in slots.iter().zip(letters) {
        chars[slot] = c;
    }
    chars.into_iter().collect()
}

/// Cyclically rotates the non-space characters by an offset drawn uniformly
/// from `1..m`, redrawing until the output differs from the input.
pub fn apply_character_shift(text: &str, rng: &mut RandomSource) -> Result<String> {
    let letters: Vec<char> = text.chars().filter(|&c| c != ' ').collect();
    let m = letters.len();
    if m <= 1 {
        return Err(Error::Uncipherable {
            label: CipherLabel::CharacterShift,
            reason: "fewer than two non-space characters",
        });
    }
    if letters.iter().all(|&c| c == letters[0]) {
        return Err(Error::Uncipherable {
            label: CipherLabel::CharacterShift,
            reason: "all non-space characters are identical",
        });
    }
    // Rotation by one only fixes constant sequences, so some offset works.
    loop {
        let k = rng.random_range(1..m);
        let out = rotate_non_space(text, k);
        if out != text {
            return Ok(out);
        }
    }
}

/// Applies the transformation named by `label`. Substitution draws a fresh
/// key from `rng`.
pub fn encipher(text: &str, label: CipherLabel, rng: &mut RandomSource) -> Result<String> {
    match label {
        CipherLabel::Substitution => {
            let key = generate_substitution_key(rng);
            Ok(apply_substitution(text, &key))
        }
        CipherLabel::Transposition => apply_transposition(text, rng),
        CipherLabel::TextReversal => Ok(apply_text_reversal(text)),
        CipherLabel::CharacterShift => apply_character_shift(text, rng),
        CipherLabel::WordReversal => Ok(apply_word_reversal(text)),
        CipherLabel::Unencrypted => Ok(text.to_string()),
    }
}
