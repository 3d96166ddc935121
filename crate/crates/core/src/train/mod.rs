//! Desk-scale joint reward-model trainer.
//!
//! A shared encoder pools music and persona token embeddings into one hidden
//! state; two autoregressive heads (text and audio) each score their target
//! sequence; the two summed negative log-likelihoods combine through a
//! balancing weight λ. Gradients are analytic and checked against central
//! finite differences. Everything is double precision, full batch, and
//! deterministic per seed.

pub mod checkpoint;
pub mod data;
pub mod fit;
pub mod generate;
pub mod grad;
pub mod math;

mod forward;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use data::{prepare_batches, TextVocab, TrainBatch, BOS, EOS, RESERVED_IDS};
pub use fit::{train, write_history, HistoryRow, TrainConfig, TrainOutcome};
pub use forward::{audio_nll, encode_shared, text_nll};
pub use generate::{generate, Head};
pub use grad::{fd_check_suite, fd_grad_check, grad, grad_batch, Grads};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use math::Mat;

/// Errors from the trainer.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dimension mismatch: {0}")]
    Dim(String),
    #[error("token id {id} out of range for vocabulary of {vocab}")]
    TokenRange { id: usize, vocab: usize },
    #[error("empty {0} sequence")]
    Empty(&'static str),
    #[error("{0}")]
    Domain(String),
    #[error("loss became non-finite at step {step}")]
    NonFinite { step: usize },
    #[error("unusable training data: {0}")]
    Data(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Model dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyConfig {
    /// Hidden width.
    pub d: usize,
    /// Text-head vocabulary size (characters + reserved ids); persona tokens
    /// share this vocabulary.
    pub text_vocab: usize,
    /// Audio-head vocabulary size (tokenizer bins + reserved ids).
    pub audio_vocab: usize,
}

impl ToyConfig {
    /// Rows of the combined embedding table: text ∪ audio (persona ids live
    /// in the text range).
    pub fn embed_rows(&self) -> usize {
        self.text_vocab + self.audio_vocab
    }
}

/// One autoregressive head: step cell plus output projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    /// Step weights, d × 2d (input is [H; prev-token embedding]).
    pub u: Mat,
    /// Step bias, d.
    pub c: Vec<f64>,
    /// Output projection, vocab × d.
    pub v: Mat,
}

impl HeadParams {
    fn zeros(d: usize, vocab: usize) -> Self {
        HeadParams {
            u: Mat::zeros(d, 2 * d),
            c: vec![0.0; d],
            v: Mat::zeros(vocab, d),
        }
    }
}

/// All trainable parameters: the shared group (embeddings + encoder) and the
/// two head groups. Also used as the value container for gradients, which
/// share this shape exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyParams {
    pub config: ToyConfig,
    /// Token embedding table, (text_vocab + audio_vocab) × d. Shared group.
    pub embed: Mat,
    /// Encoder weights, d × d. Shared group.
    pub w_s: Mat,
    /// Encoder bias, d. Shared group.
    pub b_s: Vec<f64>,
    pub text: HeadParams,
    pub audio: HeadParams,
}

impl ToyParams {
    /// All-zero parameters of the given shape.
    pub fn zeros(config: ToyConfig) -> Self {
        ToyParams {
            config,
            embed: Mat::zeros(config.embed_rows(), config.d),
            w_s: Mat::zeros(config.d, config.d),
            b_s: vec![0.0; config.d],
            text: HeadParams::zeros(config.d, config.text_vocab),
            audio: HeadParams::zeros(config.d, config.audio_vocab),
        }
    }

    /// Shape/finiteness check; returns the first problem found.
    pub fn validate(&self) -> Result<(), TrainError> {
        let c = &self.config;
        let want = [
            ("embed", self.embed.rows(), self.embed.cols(), c.embed_rows(), c.d),
            ("w_s", self.w_s.rows(), self.w_s.cols(), c.d, c.d),
            ("text.u", self.text.u.rows(), self.text.u.cols(), c.d, 2 * c.d),
            ("text.v", self.text.v.rows(), self.text.v.cols(), c.text_vocab, c.d),
            ("audio.u", self.audio.u.rows(), self.audio.u.cols(), c.d, 2 * c.d),
            ("audio.v", self.audio.v.rows(), self.audio.v.cols(), c.audio_vocab, c.d),
        ];
        for (name, rows, cols, want_rows, want_cols) in want {
            if (rows, cols) != (want_rows, want_cols) {
                return Err(TrainError::Dim(format!(
                    "{name} is {rows}×{cols}, expected {want_rows}×{want_cols}"
                )));
            }
        }
        if self.b_s.len() != c.d || self.text.c.len() != c.d || self.audio.c.len() != c.d {
            return Err(TrainError::Dim("bias length != d".into()));
        }
        if self.for_each_slice(|s| s.iter().all(|v| v.is_finite())).contains(&false) {
            return Err(TrainError::Dim("non-finite parameter entry".into()));
        }
        Ok(())
    }

    /// Canonical flattening order: embed, w_s, b_s, text (u, c, v),
    /// audio (u, c, v). Shared by [`Self::assign`] and the checkpoint format.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.for_each_slice(|s| out.extend_from_slice(s));
        out
    }

    /// Overwrites all entries from a [`Self::flatten`]-ordered slice.
    pub fn assign(&mut self, flat: &[f64]) {
        let mut at = 0;
        self.for_each_slice_mut(|s| {
            s.copy_from_slice(&flat[at..at + s.len()]);
            at += s.len();
        });
        debug_assert_eq!(at, flat.len());
    }

    /// self += scale · other (same shapes).
    pub fn add_scaled(&mut self, other: &ToyParams, scale: f64) {
        self.embed.add_scaled(&other.embed, scale);
        self.w_s.add_scaled(&other.w_s, scale);
        math::axpy(&mut self.b_s, &other.b_s, scale);
        self.text.u.add_scaled(&other.text.u, scale);
        math::axpy(&mut self.text.c, &other.text.c, scale);
        self.text.v.add_scaled(&other.text.v, scale);
        self.audio.u.add_scaled(&other.audio.u, scale);
        math::axpy(&mut self.audio.c, &other.audio.c, scale);
        self.audio.v.add_scaled(&other.audio.v, scale);
    }

    fn for_each_slice<T>(&self, mut f: impl FnMut(&[f64]) -> T) -> Vec<T> {
        vec![
            f(self.embed.data()),
            f(self.w_s.data()),
            f(&self.b_s),
            f(self.text.u.data()),
            f(&self.text.c),
            f(self.text.v.data()),
            f(self.audio.u.data()),
            f(&self.audio.c),
            f(self.audio.v.data()),
        ]
    }

    fn for_each_slice_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        f(self.embed.data_mut());
        f(self.w_s.data_mut());
        f(&mut self.b_s);
        f(self.text.u.data_mut());
        f(&mut self.text.c);
        f(self.text.v.data_mut());
        f(self.audio.u.data_mut());
        f(&mut self.audio.c);
        f(self.audio.v.data_mut());
    }
}

/// Draws all parameters uniformly from [-0.1, 0.1], deterministically per
/// seed.
pub fn init_params(config: ToyConfig, seed: u64) -> ToyParams {
    assert!(config.d >= 2, "hidden width must be at least 2");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = ToyParams::zeros(config);
    params.for_each_slice_mut(|s| {
        for v in s {
            *v = rng.gen_range(-0.1..=0.1);
        }
    });
    params
}

/// Per-batch loss summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub l_text: f64,
    pub l_audio: f64,
    pub l_total: f64,
    pub lambda: f64,
}

/// l_total = λ·l_text + (1−λ)·l_audio, rejecting λ outside [0, 1].
pub fn total_loss(l_text: f64, l_audio: f64, lambda: f64) -> Result<f64, TrainError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(TrainError::Domain(format!(
            "lambda must be in [0, 1], got {lambda}"
        )));
    }
    Ok(lambda * l_text + (1.0 - lambda) * l_audio)
}
