mod common;

use cipher_id::corpus::{encipher_round_robin, LabeledRecord};
use cipher_id::tokenizer::{
    train_bpe_traced, train_tokenizer, train_word_tokenizer, train_wordpiece_traced, Tokenizer, TokenizerKind, PAD_ID,
};
use cipher_id::{seeded, Plaintext};
use common::{random_plaintext, replay_merges};
use proptest::prelude::*;

/// About `chars` characters of enciphered random text.
fn small_corpus(chars: usize, seed: u64) -> Vec<String> {
    let mut rng = seeded(seed);
    let mut lines = Vec::new();
    let mut total = 0;
    while total < chars {
        let line = random_plaintext(&mut rng);
        total += line.len() + 1;
        lines.push(Plaintext::new(line).unwrap());
    }
    let (records, _) = encipher_round_robin(&lines, &mut rng).unwrap();
    records.into_iter().map(|r: LabeledRecord| r.text).collect()
}

fn check_trainer(wordpiece: bool, chars: usize, vocab_size: usize, seed: u64) {
    let corpus = small_corpus(chars, seed);
    let refs: Vec<&str> = corpus.iter().map(String::as_str).collect();
    let (tok, trace) = if wordpiece {
        train_wordpiece_traced(refs.iter().copied(), vocab_size).unwrap()
    } else {
        train_bpe_traced(refs.iter().copied(), vocab_size).unwrap()
    };
    let replay = replay_merges(&refs, wordpiece, &trace).unwrap_or_else(|e| panic!("seed {seed}: {e}"));
    assert!(
        tok.vocab_size() == vocab_size || replay.max_pair_frequency < 2,
        "stopped early with vocab {} and a pair of frequency {}",
        tok.vocab_size(),
        replay.max_pair_frequency
    );
    if !wordpiece {
        for (word, pieces) in &replay.segmentation {
            assert_eq!(&tok.bpe_pieces(word), pieces, "segmentation of {word:?}");
        }
    }
}

#[test]
fn bpe_merges_are_maximal_frequency() {
    for seed in 0..4 {
        check_trainer(false, 10_000, 400, seed);
    }
    // Small vocabulary: stops because the vocabulary is full.
    check_trainer(false, 3_000, 60, 9);
}

#[test]
fn wordpiece_merges_are_maximal_score() {
    for seed in 0..4 {
        check_trainer(true, 10_000, 400, seed);
    }
    check_trainer(true, 3_000, 80, 9);
}

#[test]
fn saturated_training_stops_when_no_pair_repeats() {
    // A huge budget on a tiny corpus runs out of repeated pairs.
    for wordpiece in [false, true] {
        check_trainer(wordpiece, 400, 100_000, 3);
    }
}

#[test]
fn rare_but_bound_pair_beats_frequent_independent_pair() {
    // "q" only ever appears before "u"; "e" is frequent everywhere.
    let corpus = ["quiz quota trees trees trees", "xees xees ees ees"];
    let (_, trace) = train_wordpiece_traced(corpus, 100).unwrap();
    assert_eq!(trace[0].pair, ("q".to_string(), "##u".to_string()));
    replay_merges(&corpus, true, &trace).unwrap();
    let (_, bpe) = train_bpe_traced(["aaab aaab"], 100).unwrap();
    assert_eq!((bpe[0].pair.0.as_str(), bpe[0].pair.1.as_str(), bpe[0].frequency), ("a", "a", 4));
}

#[test]
fn trained_files_are_byte_identical() {
    let corpus = small_corpus(8_000, 77);
    for kind in [TokenizerKind::Word, TokenizerKind::Bpe, TokenizerKind::WordPiece] {
        let a = train_tokenizer(kind, corpus.iter().map(String::as_str), 300).unwrap();
        let b = train_tokenizer(kind, corpus.iter().map(String::as_str), 300).unwrap();
        assert_eq!(a.to_json(), b.to_json(), "{kind:?}");
    }
}

#[test]
fn save_load_encodes_identically() {
    let corpus = small_corpus(8_000, 5);
    let dir = tempfile::tempdir().unwrap();
    let mut rng = seeded(6);
    let probes: Vec<String> = (0..1000).map(|_| random_plaintext(&mut rng)).collect();
    for kind in [TokenizerKind::Char, TokenizerKind::Word, TokenizerKind::Bpe, TokenizerKind::WordPiece] {
        let tok = train_tokenizer(kind, corpus.iter().map(String::as_str), 250).unwrap();
        let path = dir.path().join(format!("{kind:?}.json"));
        tok.save(&path).unwrap();
        let back = Tokenizer::load(&path).unwrap();
        assert_eq!(back.merges(), tok.merges());
        for p in &probes {
            assert_eq!(back.encode(p, 64), tok.encode(p, 64));
        }
    }
}

#[test]
fn word_vocab_by_frequency() {
    let tok = train_word_tokenizer(["a b b"], 3).unwrap();
    assert_eq!(tok.vocab().tokens(), ["<pad>", "<unk>", "b"]);
    assert_eq!(tok.tokenize("zzz"), vec![1]);
}

proptest! {
    #[test]
    fn char_encoding_is_exact(text in "[a-z]{1,8}( [a-z]{1,8}){0,10}", max_len in 1usize..120) {
        let tok = Tokenizer::char_level();
        prop_assert_eq!(tok.vocab_size(), 28);
        let full = tok.tokenize(&text);
        prop_assert_eq!(tok.decode(&full), text.clone());
        let enc = tok.encode(&text, max_len);
        prop_assert_eq!(enc.ids.len(), max_len);
        prop_assert_eq!(enc.len, full.len().min(max_len));
        prop_assert!(enc.ids[enc.len..].iter().all(|&i| i == PAD_ID));
        prop_assert!(enc.ids[..enc.len].iter().all(|&i| i != PAD_ID));
    }
}
