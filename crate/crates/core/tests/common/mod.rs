//! Test-only oracles shared by the integration test targets.
#![allow(dead_code)]

use cipher_id::model::{CellType, Classifier, DropoutMasks, ModelConfig, Params, Sequence};
use cipher_id::CipherLabel;

pub fn toy_model(cell: CellType, vocab_size: usize, seed: u64) -> Classifier {
    let mut cfg = ModelConfig::new(cell, vocab_size, 32);
    cfg.embed_dim = 8;
    cfg.hidden_dim = 8;
    cfg.head_dims = [16, 16];
    Classifier::new(cfg, seed).unwrap()
}

/// Perturb every bias away from zero so that bias gradients are exercised
/// at a generic point rather than at the initial value.
pub fn jitter_biases(model: &mut Classifier, seed: u64) {
    let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    };
    let p = &mut model.params;
    for b in [&mut p.b_input, &mut p.b_recurrent, &mut p.b_head1, &mut p.b_head2, &mut p.b_out] {
        b.mapv_inplace(|x| x + 0.2 * next());
    }
}

pub fn loss_at(model: &Classifier, batch: &[Sequence], masks: Option<&DropoutMasks>, labels: &[CipherLabel]) -> f64 {
    let probs = model.forward(batch, masks).unwrap();
    cipher_id::model::cross_entropy(&probs, labels)
}

/// Central finite differences of the mean loss with respect to every
/// parameter, computed by perturbing one scalar at a time.
///
/// A ReLU kink inside `[x − h, x + h]` corrupts a central difference. For a
/// smooth loss the estimates at `h` and `h/2` agree to O(h²), so when they
/// disagree the step shrinks tenfold until they do. This needs no knowledge
/// of the analytic gradient.
pub fn numeric_gradient(
    model: &Classifier,
    batch: &[Sequence],
    masks: Option<&DropoutMasks>,
    labels: &[CipherLabel],
    step: f64,
) -> Params {
    let mut probe = model.clone();
    let mut grad = Params::zeros(&model.config);
    let sizes: Vec<usize> = model.params.slices().iter().map(|s| s.len()).collect();
    for (tensor, &size) in sizes.iter().enumerate() {
        for k in 0..size {
            let orig = probe.params.slices()[tensor][k];
            let mut central = |h: f64| {
                probe.params.slices_mut()[tensor][k] = orig + h;
                let up = loss_at(&probe, batch, masks, labels);
                probe.params.slices_mut()[tensor][k] = orig - h;
                let down = loss_at(&probe, batch, masks, labels);
                probe.params.slices_mut()[tensor][k] = orig;
                (up - down) / (2.0 * h)
            };
            let mut h = step;
            let mut estimate = central(h / 2.0);
            for _ in 0..4 {
                let coarse = central(h);
                if (coarse - estimate).abs() <= 1e-8 * estimate.abs().max(1.0) {
                    break;
                }
                h /= 10.0;
                estimate = central(h / 2.0);
            }
            grad.slices_mut()[tensor][k] = estimate;
        }
    }
    grad
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or 0 when both are (numerically) zero.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = norm(a).max(norm(b));
    if scale < 1e-12 {
        0.0
    } else {
        diff / scale
    }
}

/// Four sequences of different lengths with PAD tails of different sizes.
pub fn toy_batch(vocab_size: usize) -> (Vec<Vec<u32>>, Vec<usize>, Vec<CipherLabel>) {
    let v = vocab_size as u32;
    let ids = vec![
        vec![1, 2 % v + 1, 3, 4, 5, 0, 0],
        vec![(v - 1), 1, 2, 0],
        vec![3, 3, (v - 2), 1, 2, 5, 6],
        vec![2, 0, 0, 0, 0],
    ];
    let lens = vec![5, 3, 7, 1];
    let labels = vec![
        CipherLabel::Substitution,
        CipherLabel::CharacterShift,
        CipherLabel::Unencrypted,
        CipherLabel::WordReversal,
    ];
    (ids, lens, labels)
}

/// Largest relative error over parameter groups, with each group's name.
pub fn gradient_check(cell: CellType, vocab_size: usize, with_dropout: bool, seed: u64) -> Vec<(&'static str, f64)> {
    let mut model = toy_model(cell, vocab_size, seed);
    jitter_biases(&mut model, seed);
    let (ids, lens, labels) = toy_batch(vocab_size);
    let batch: Vec<Sequence> = ids.iter().zip(&lens).map(|(i, &l)| Sequence::new(i, l)).collect();
    let masks = with_dropout.then(|| model.sample_dropout(batch.len(), &mut cipher_id::seeded(seed + 1)));
    let pass = model.forward_train(&batch, masks.as_ref()).unwrap();
    let (_, analytic) = model.backward(pass, &labels).unwrap();
    let numeric = numeric_gradient(&model, &batch, masks.as_ref(), &labels, 1e-4);
    cipher_id::model::TENSOR_NAMES
        .iter()
        .zip(analytic.slices().iter().zip(numeric.slices()))
        .map(|(name, (a, n))| (*name, relative_error(a, n)))
        .collect()
}

// ---------------------------------------------------------------------------
// Cipher oracles

use rand::Rng;

/// Random cleaned text. Small alphabets make repeated and degenerate
/// inputs common.
pub fn random_plaintext(rng: &mut cipher_id::RandomSource) -> String {
    let alphabet: &[u8] = match rng.random_range(0..4) {
        0 => b"ab",
        1 => b"abcde",
        _ => b"abcdefghijklmnopqrstuvwxyz",
    };
    let target = rng.random_range(7..80);
    let mut s = String::new();
    while s.len() < target {
        if !s.is_empty() {
            s.push(' ');
        }
        for _ in 0..rng.random_range(1..9) {
            s.push(alphabet[rng.random_range(0..alphabet.len())] as char);
        }
    }
    s
}

fn space_positions(s: &str) -> Vec<usize> {
    s.char_indices().filter(|&(_, c)| c == ' ').map(|(i, _)| i).collect()
}

fn sorted_chars(s: &str) -> Vec<char> {
    let mut v: Vec<char> = s.chars().collect();
    v.sort_unstable();
    v
}

fn non_space(s: &str) -> Vec<char> {
    s.chars().filter(|&c| c != ' ').collect()
}

/// True when no permutation of the non-space characters changes the text.
pub fn is_degenerate(s: &str) -> bool {
    let ns = non_space(s);
    ns.len() < 2 || ns.iter().all(|&c| c == ns[0])
}

/// The reversals fix palindromic input; every other cipher must change it.
pub fn may_be_unchanged(label: CipherLabel) -> bool {
    matches!(
        label,
        CipherLabel::Unencrypted | CipherLabel::TextReversal | CipherLabel::WordReversal
    )
}

/// Every enciphered record differs from its source. The reversals are
/// involutions, so their source is recovered by applying them again; the
/// other ciphers are checked against their source when they are produced.
pub fn check_dataset_nonidentity(records: &[cipher_id::corpus::LabeledRecord]) -> Result<(), String> {
    for r in records {
        let source = match r.label {
            CipherLabel::TextReversal => cipher_id::cipher::apply_text_reversal(&r.text),
            CipherLabel::WordReversal => cipher_id::cipher::apply_word_reversal(&r.text),
            _ => continue,
        };
        if source == r.text {
            return Err(format!("{:?} record {:?} equals its source", r.label, r.text));
        }
    }
    Ok(())
}

/// Checks one cipher output against the defining properties of `label`.
/// `Err` carries a description of the violated property.
pub fn check_cipher_output(plain: &str, label: CipherLabel, out: &str) -> Result<(), String> {
    let fail = |what: &str| Err(format!("{label:?} on {plain:?} -> {out:?}: {what}"));
    if out.chars().count() != plain.chars().count() {
        return fail("length changed");
    }
    if !out.chars().all(|c| c == ' ' || c.is_ascii_lowercase()) {
        return fail("left the alphabet");
    }
    let keeps_spaces = matches!(
        label,
        CipherLabel::Substitution | CipherLabel::Transposition | CipherLabel::WordReversal | CipherLabel::CharacterShift
    );
    if keeps_spaces && space_positions(out) != space_positions(plain) {
        return fail("moved a space");
    }
    if label != CipherLabel::Substitution && label != CipherLabel::Unencrypted && sorted_chars(out) != sorted_chars(plain)
    {
        return fail("character multiset changed");
    }
    match label {
        CipherLabel::Unencrypted => {
            if out != plain {
                return fail("unencrypted text changed");
            }
        }
        CipherLabel::Substitution => {
            let mut forward = [None::<char>; 26];
            let mut backward = [None::<char>; 26];
            for (p, c) in plain.chars().zip(out.chars()) {
                if p == ' ' {
                    continue;
                }
                if p == c {
                    return fail("letter mapped to itself");
                }
                let (pi, ci) = ((p as u8 - b'a') as usize, (c as u8 - b'a') as usize);
                if forward[pi].is_some_and(|x| x != c) || backward[ci].is_some_and(|x| x != p) {
                    return fail("letter mapping is not a bijection");
                }
                forward[pi] = Some(c);
                backward[ci] = Some(p);
            }
        }
        CipherLabel::Transposition => {
            if out == plain {
                return fail("transposition left the text unchanged");
            }
        }
        CipherLabel::TextReversal => {
            let reversed: String = plain.chars().rev().collect();
            if out != reversed {
                return fail("not the reversed text");
            }
            if cipher_id::cipher::apply_text_reversal(out) != plain {
                return fail("reversal is not an involution");
            }
        }
        CipherLabel::WordReversal => {
            let expected: Vec<String> = plain.split(' ').map(|w| w.chars().rev().collect()).collect();
            if out != expected.join(" ") {
                return fail("words not reversed in place");
            }
            if cipher_id::cipher::apply_word_reversal(out) != plain {
                return fail("word reversal is not an involution");
            }
        }
        CipherLabel::CharacterShift => {
            let ns = non_space(plain);
            let target = non_space(out);
            let m = ns.len();
            let is_rotation = (1..m).any(|k| {
                let mut r = ns.clone();
                r.rotate_right(k);
                r == target
            });
            if !is_rotation {
                return fail("not a non-trivial rotation of the non-space characters");
            }
            if out == plain {
                return fail("shift left the text unchanged");
            }
        }
    }
    Ok(())
}

/// Enciphers `trials` random texts with every label in turn and checks each
/// output. Returns the number of outputs checked and the first failure.
pub fn run_cipher_trials(trials: usize, seed: u64) -> (usize, Option<String>) {
    let mut rng = cipher_id::seeded(seed);
    let mut checked = 0;
    for t in 0..trials {
        let plain = random_plaintext(&mut rng);
        let label = CipherLabel::from_index(t % 6).unwrap();
        match cipher_id::cipher::encipher(&plain, label, &mut rng) {
            Ok(out) => {
                // Palindromes survive the reversals; the dataset builder
                // drops them, which `check_dataset_nonidentity` covers.
                if let Err(e) = check_cipher_output(&plain, label, &out) {
                    return (checked, Some(e));
                }
                if !may_be_unchanged(label) && out == plain {
                    return (checked, Some(format!("{label:?} emitted its input {plain:?}")));
                }
                checked += 1;
            }
            Err(cipher_id::Error::Uncipherable { .. }) => {
                let expected = matches!(label, CipherLabel::Transposition | CipherLabel::CharacterShift)
                    && is_degenerate(&plain);
                if !expected {
                    return (checked, Some(format!("{label:?} rejected {plain:?}")));
                }
            }
            Err(e) => return (checked, Some(e.to_string())),
        }
    }
    // Keys: derangement, bijection, inverse recovers the text.
    for _ in 0..trials / 10 {
        let key = cipher_id::cipher::generate_substitution_key(&mut rng);
        let letters: Vec<char> = key.letters().chars().collect();
        if letters.iter().enumerate().any(|(i, &c)| c == (b'a' + i as u8) as char) {
            return (checked, Some(format!("key {} has a fixed point", key.letters())));
        }
        if sorted_chars(&key.letters()) != ('a'..='z').collect::<Vec<_>>() {
            return (checked, Some(format!("key {} is not a permutation", key.letters())));
        }
        let plain = random_plaintext(&mut rng);
        let ct = cipher_id::cipher::apply_substitution(&plain, &key);
        let by_hand: String = plain
            .chars()
            .map(|c| if c == ' ' { ' ' } else { letters[(c as u8 - b'a') as usize] })
            .collect();
        if ct != by_hand || cipher_id::cipher::apply_substitution(&ct, &key.inverse()) != plain {
            return (checked, Some(format!("substitution of {plain:?} disagrees with the key")));
        }
        checked += 1;
    }
    (checked, None)
}

// ---------------------------------------------------------------------------
// Merge oracles

/// Replays `trace` on the corpus with a from-scratch pair count before every
/// step, checking that each chosen pair has the maximal score (ties to the
/// lexicographically smallest pair) and the recorded frequency.
pub fn replay_merges(corpus: &[&str], wordpiece: bool, trace: &[cipher_id::tokenizer::MergeStep]) -> Result<Replay, String> {
    let originals: Vec<&str> = corpus.iter().flat_map(|line| line.split_whitespace()).collect();
    let mut words: Vec<Vec<String>> = originals
        .iter()
        .map(|w| {
            let mut s: Vec<String> = w
                .chars()
                .enumerate()
                .map(|(i, c)| if wordpiece && i > 0 { format!("##{c}") } else { c.to_string() })
                .collect();
            if !wordpiece {
                s.push("</w>".to_string());
            }
            s
        })
        .collect();
    let count = |words: &Vec<Vec<String>>| {
        let mut pairs: std::collections::BTreeMap<(String, String), u64> = Default::default();
        let mut symbols: std::collections::BTreeMap<String, u64> = Default::default();
        for w in words {
            for s in w {
                *symbols.entry(s.clone()).or_default() += 1;
            }
            for p in w.windows(2) {
                *pairs.entry((p[0].clone(), p[1].clone())).or_default() += 1;
            }
        }
        (pairs, symbols)
    };
    for (n, step) in trace.iter().enumerate() {
        let (pairs, symbols) = count(&words);
        let score = |(a, b): &(String, String), f: u64| {
            if wordpiece {
                f as f64 / (symbols[a] as f64 * symbols[b] as f64)
            } else {
                f as f64
            }
        };
        let mut best: Option<(&(String, String), f64)> = None;
        for (pair, &f) in &pairs {
            if f < 2 {
                continue;
            }
            let s = score(pair, f);
            // BTreeMap order is lexicographic, so strict `>` keeps the
            // smallest pair among equal scores.
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((pair, s));
            }
        }
        let Some((best_pair, best_score)) = best else {
            return Err(format!("step {n}: no pair occurs twice, but {:?} was merged", step.pair));
        };
        let freq = pairs.get(&step.pair).copied().unwrap_or(0);
        if freq != step.frequency {
            return Err(format!("step {n}: {:?} occurs {freq} times, trace says {}", step.pair, step.frequency));
        }
        let chosen = score(&step.pair, freq);
        if chosen < best_score || (chosen == best_score && &step.pair != best_pair) {
            return Err(format!(
                "step {n}: merged {:?} (score {chosen}) but {best_pair:?} scores {best_score}",
                step.pair
            ));
        }
        let merged = if wordpiece {
            format!("{}{}", step.pair.0, step.pair.1.trim_start_matches("##"))
        } else {
            format!("{}{}", step.pair.0, step.pair.1)
        };
        for w in words.iter_mut() {
            let mut out = Vec::with_capacity(w.len());
            let mut i = 0;
            while i < w.len() {
                if i + 1 < w.len() && w[i] == step.pair.0 && w[i + 1] == step.pair.1 {
                    out.push(merged.clone());
                    i += 2;
                } else {
                    out.push(w[i].clone());
                    i += 1;
                }
            }
            *w = out;
        }
    }
    Ok(Replay {
        max_pair_frequency: count(&words).0.values().copied().max().unwrap_or(0),
        segmentation: originals.iter().map(|w| w.to_string()).zip(words).collect(),
    })
}

pub struct Replay {
    /// Largest pair count left after the last merge.
    pub max_pair_frequency: u64,
    /// Final symbols of every training word.
    pub segmentation: std::collections::BTreeMap<String, Vec<String>>,
}

// ---------------------------------------------------------------------------
// Co-occurrence oracle

/// Dense symmetric counts by direct double loop over every document.
pub fn brute_force_cooccurrence(docs: &[Vec<u32>], vocab_size: usize, window: usize) -> Vec<Vec<f64>> {
    let mut x = vec![vec![0.0; vocab_size]; vocab_size];
    for doc in docs {
        for a in 0..doc.len() {
            for b in 0..doc.len() {
                let d = a.abs_diff(b);
                if d >= 1 && d <= window {
                    x[doc[a] as usize][doc[b] as usize] += 1.0 / d as f64;
                }
            }
        }
    }
    x
}
