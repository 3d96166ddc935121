//! Full-batch gradient descent over prepared records, with a per-step loss
//! history and a CSV writer for it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::DatasetRecord;

use super::data::{prepare_batches, TextVocab, RESERVED_IDS};
use super::grad::grad_batch;
use super::{init_params, ToyConfig, ToyParams, TrainError};

/// Hyper-parameters for a fitting run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Hidden width.
    pub d: usize,
    /// Learning rate.
    pub lr: f64,
    /// Number of gradient-descent updates.
    pub steps: usize,
    /// Text-branch weight in the blended loss, in [0, 1].
    pub lambda: f64,
    /// Seed for parameter initialization.
    pub seed: u64,
    /// Audio-tokenizer vocabulary (bins; reserved ids are added on top).
    pub tok_vocab: u32,
    /// Audio-tokenizer frames per second.
    pub frame_rate: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            d: 16,
            lr: 0.5,
            steps: 500,
            lambda: 2.0 / 3.0,
            seed: 0,
            tok_vocab: 64,
            frame_rate: 50,
        }
    }
}

/// Batch losses recorded before the update of `step` (the last row is the
/// post-training evaluation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub step: usize,
    pub l_text: f64,
    pub l_audio: f64,
    pub l_total: f64,
}

/// Everything a fitting run produces.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ToyParams,
    pub vocab: TextVocab,
    /// One row per step plus a final evaluation row: `steps + 1` in total.
    pub history: Vec<HistoryRow>,
}

/// Fits the model to `records` by full-batch gradient descent.
pub fn train(records: &[DatasetRecord], cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    if cfg.d < 2 {
        return Err(TrainError::Domain(format!(
            "hidden width must be at least 2, got {}",
            cfg.d
        )));
    }
    if !(cfg.lr.is_finite() && cfg.lr > 0.0) {
        return Err(TrainError::Domain(format!(
            "learning rate must be positive and finite, got {}",
            cfg.lr
        )));
    }
    let vocab = TextVocab::from_records(records);
    let batches = prepare_batches(records, &vocab, cfg.tok_vocab, cfg.frame_rate)?;
    let model_cfg = ToyConfig {
        d: cfg.d,
        text_vocab: vocab.size(),
        audio_vocab: cfg.tok_vocab as usize + RESERVED_IDS,
    };
    let mut params = init_params(model_cfg, cfg.seed);
    let mut history = Vec::with_capacity(cfg.steps + 1);
    for step in 0..=cfg.steps {
        let (report, g) = grad_batch(&params, &batches, cfg.lambda)?;
        if !report.l_total.is_finite() {
            return Err(TrainError::NonFinite { step });
        }
        history.push(HistoryRow {
            step,
            l_text: report.l_text,
            l_audio: report.l_audio,
            l_total: report.l_total,
        });
        if step < cfg.steps {
            params.add_scaled(&g, -cfg.lr);
        }
    }
    let (first, last) = (history[0].l_total, history[cfg.steps].l_total);
    log::info!(
        "fitted {} records for {} steps: loss {first:.4} -> {last:.4}",
        batches.len(),
        cfg.steps
    );
    Ok(TrainOutcome {
        params,
        vocab,
        history,
    })
}

/// Writes the loss history as CSV (`step,l_text,l_audio,l_total`).
pub fn write_history(path: &Path, rows: &[HistoryRow]) -> Result<(), TrainError> {
    let mut out = String::from("step,l_text,l_audio,l_total\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.step, r.l_text, r.l_audio, r.l_total
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}
