//! Cipher-type identification toolkit.
//!
//! Generates labeled datasets of five classical text transformations plus
//! unencrypted text, trains tokenizers and GloVe-style embeddings, trains
//! GRU/LSTM classifiers that name the transformation applied to a text, and
//! reports per-class accuracy tables.

pub mod cipher;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod report;
pub mod rng;
pub mod tokenizer;

pub use cipher::{CipherLabel, Plaintext};
pub use error::{Error, Result};
pub use rng::{seeded, RandomSource};
