use std::collections::HashMap;

use super::{Tokenizer, TokenizerKind, Vocabulary, PAD_TOKEN, UNK_TOKEN};
use crate::error::{Error, Result};

/// Keeps PAD, UNK and the `max_vocab - 2` most frequent whitespace-delimited
/// tokens. Equal counts are ordered lexicographically.
pub fn train_word_tokenizer<'a, I>(corpus: I, max_vocab: usize) -> Result<Tokenizer>
where
    I: IntoIterator<Item = &'a str>,
{
    if max_vocab < 2 {
        return Err(Error::InvalidArgument("max_vocab must be at least 2".into()));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for line in corpus {
        for word in line.split_whitespace() {
            *counts.entry(word).or_default() += 1;
        }
    }
    if counts.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut ranked: Vec<(&str, u64)> = counts.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut tokens = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
    tokens.extend(
        ranked
            .into_iter()
            .filter(|(w, _)| *w != PAD_TOKEN && *w != UNK_TOKEN)
            .take(max_vocab - 2)
            .map(|(w, _)| w.to_string()),
    );
    Ok(Tokenizer::from_parts(
        TokenizerKind::Word,
        Vocabulary::from_tokens(tokens, true)?,
        Vec::new(),
    ))
}
