//! Forward passes: the shared encoder and the two autoregressive heads.
//!
//! Encoder: H = tanh(W_s · mean(E[music ++ persona]) + b_s).
//! Head step i: s_i = tanh(U·[H; E[prev]] + c), logits = V·s_i, with the
//! reserved BOS id as the step-0 predecessor. Losses are negative
//! log-likelihoods in nats, summed over positions.

use super::data::BOS;
use super::math::{axpy, log_softmax_at, softmax};
use super::{HeadParams, ToyParams, TrainError};

/// Which target branch a head call runs on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(super) enum Branch {
    Text,
    Audio,
}

impl Branch {
    /// Head parameters, embedding-row offset, and local vocabulary size.
    pub(super) fn space<'p>(self, params: &'p ToyParams) -> (&'p HeadParams, usize, usize) {
        match self {
            Branch::Text => (&params.text, 0, params.config.text_vocab),
            Branch::Audio => (
                &params.audio,
                params.config.text_vocab,
                params.config.audio_vocab,
            ),
        }
    }
}

/// Everything the backward pass needs about one encoder evaluation.
pub(super) struct EncodeTrace {
    /// Absolute embedding-table rows of the pooled context tokens.
    pub rows: Vec<usize>,
    /// Mean of those embedding rows.
    pub mean: Vec<f64>,
    /// H = tanh(W_s · mean + b_s).
    pub h: Vec<f64>,
}

pub(super) fn encode_trace(
    params: &ToyParams,
    music_ids: &[usize],
    persona_ids: &[usize],
) -> Result<EncodeTrace, TrainError> {
    let cfg = &params.config;
    if music_ids.is_empty() && persona_ids.is_empty() {
        return Err(TrainError::Empty("context token"));
    }
    let mut rows = Vec::with_capacity(music_ids.len() + persona_ids.len());
    for &id in music_ids {
        if id >= cfg.audio_vocab {
            return Err(TrainError::TokenRange {
                id,
                vocab: cfg.audio_vocab,
            });
        }
        rows.push(cfg.text_vocab + id);
    }
    for &id in persona_ids {
        if id >= cfg.text_vocab {
            return Err(TrainError::TokenRange {
                id,
                vocab: cfg.text_vocab,
            });
        }
        rows.push(id);
    }
    let mut mean = vec![0.0; cfg.d];
    for &row in &rows {
        axpy(&mut mean, params.embed.row(row), 1.0);
    }
    let scale = 1.0 / rows.len() as f64;
    for v in &mut mean {
        *v *= scale;
    }
    let mut h = params.w_s.matvec(&mean);
    axpy(&mut h, &params.b_s, 1.0);
    for v in &mut h {
        *v = v.tanh();
    }
    Ok(EncodeTrace { rows, mean, h })
}

/// Pools music tokens (audio-vocabulary ids) and persona tokens
/// (text-vocabulary ids) into the shared hidden state H of width d; every
/// entry lies in (-1, 1).
pub fn encode_shared(
    params: &ToyParams,
    music_ids: &[usize],
    persona_ids: &[usize],
) -> Result<Vec<f64>, TrainError> {
    Ok(encode_trace(params, music_ids, persona_ids)?.h)
}

/// Per-position forward state kept for backpropagation.
pub(super) struct StepTrace {
    /// Input [H; E(prev)], length 2d.
    pub x: Vec<f64>,
    /// Step activation tanh(U x + c), length d.
    pub s: Vec<f64>,
    /// softmax(V s), length = head vocabulary.
    pub p: Vec<f64>,
    /// Ground-truth token at this position (head-local id).
    pub target: usize,
    /// Absolute embedding row of the predecessor token.
    pub prev_row: usize,
}

/// One head step from predecessor `prev` (head-local id): returns the input
/// [H; E(prev)], the activation s, and the output logits.
pub(super) fn step_parts(
    params: &ToyParams,
    branch: Branch,
    h: &[f64],
    prev: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (head, offset, _) = branch.space(params);
    let d = params.config.d;
    let mut x = Vec::with_capacity(2 * d);
    x.extend_from_slice(h);
    x.extend_from_slice(params.embed.row(offset + prev));
    let mut s = head.u.matvec(&x);
    axpy(&mut s, &head.c, 1.0);
    for v in &mut s {
        *v = v.tanh();
    }
    let logits = head.v.matvec(&s);
    (x, s, logits)
}

/// Runs one head over its target sequence; returns the summed NLL and the
/// per-step traces.
pub(super) fn head_forward(
    params: &ToyParams,
    branch: Branch,
    h: &[f64],
    targets: &[usize],
) -> Result<(f64, Vec<StepTrace>), TrainError> {
    let (_, offset, vocab) = branch.space(params);
    let d = params.config.d;
    if h.len() != d {
        return Err(TrainError::Dim(format!(
            "H has length {}, expected {d}",
            h.len()
        )));
    }
    if targets.is_empty() {
        return Err(TrainError::Empty("target"));
    }
    if let Some(&id) = targets.iter().find(|&&t| t >= vocab) {
        return Err(TrainError::TokenRange { id, vocab });
    }
    let mut loss = 0.0;
    let mut steps = Vec::with_capacity(targets.len());
    let mut prev = BOS;
    for &target in targets {
        let (x, s, logits) = step_parts(params, branch, h, prev);
        loss -= log_softmax_at(&logits, target);
        steps.push(StepTrace {
            x,
            s,
            p: softmax(&logits),
            target,
            prev_row: offset + prev,
        });
        prev = target;
    }
    Ok((loss, steps))
}

/// Summed text-branch NLL: −Σᵢ ln p(tᵢ | H, t₍<ᵢ₎).
pub fn text_nll(params: &ToyParams, h: &[f64], targets: &[usize]) -> Result<f64, TrainError> {
    Ok(head_forward(params, Branch::Text, h, targets)?.0)
}

/// Summed audio-branch NLL, same step model over the audio vocabulary.
pub fn audio_nll(params: &ToyParams, h: &[f64], targets: &[usize]) -> Result<f64, TrainError> {
    Ok(head_forward(params, Branch::Audio, h, targets)?.0)
}
