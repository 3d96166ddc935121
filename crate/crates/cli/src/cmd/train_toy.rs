//! `train-toy`: fit the desk-scale joint text/audio critique model on a
//! dataset, writing a checkpoint and a loss-history CSV.

use std::path::PathBuf;

use anyhow::anyhow;
use cadenza_core::model::read_records;
use cadenza_core::train::{save_checkpoint, train, write_history, Checkpoint, TrainConfig};
use clap::Args;

use crate::config::{runtime, usage, CliError, Settings};
use crate::paths::{anchor, require_file};

#[derive(Debug, Args)]
pub struct TrainToyArgs {
    /// Training dataset (JSONL).
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint output path; the loss CSV lands beside it.
    #[arg(long)]
    pub out: PathBuf,
    /// Text-branch weight in the blended loss, in [0, 1].
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Gradient-descent steps.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Parameter-init seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Hidden width.
    #[arg(long)]
    pub d: Option<usize>,
    /// Audio-tokenizer vocabulary (bins).
    #[arg(long)]
    pub tok_vocab: Option<u32>,
    /// Audio-tokenizer frames per second.
    #[arg(long)]
    pub frame_rate: Option<u32>,
}

pub fn run(args: &TrainToyArgs, settings: &Settings) -> Result<(), CliError> {
    let defaults = TrainConfig::default();
    let cfg = TrainConfig {
        d: settings.usize_setting(args.d, "d", defaults.d)?,
        lr: settings.f64_setting(args.lr, "lr", defaults.lr)?,
        steps: settings.usize_setting(args.steps, "steps", defaults.steps)?,
        lambda: settings.f64_setting(args.lambda, "lambda", defaults.lambda)?,
        seed: settings.u64_setting(args.seed, "seed", defaults.seed)?,
        tok_vocab: settings.u32_setting(args.tok_vocab, "tok_vocab", defaults.tok_vocab)?,
        frame_rate: settings.u32_setting(args.frame_rate, "frame_rate", defaults.frame_rate)?,
    };
    if !(0.0..=1.0).contains(&cfg.lambda) {
        return Err(usage(format!("--lambda must lie in [0, 1], got {}", cfg.lambda)));
    }
    if cfg.steps == 0 {
        return Err(usage("--steps must be at least 1"));
    }
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(usage(format!("--lr must be positive, got {}", cfg.lr)));
    }
    if cfg.d < 2 {
        return Err(usage(format!("--d must be at least 2, got {}", cfg.d)));
    }
    if cfg.tok_vocab == 0 || cfg.frame_rate == 0 {
        return Err(usage("--tok-vocab and --frame-rate must be at least 1"));
    }
    require_file(&args.data)?;

    let mut records = read_records(&args.data).map_err(runtime)?;
    if records.is_empty() {
        return Err(runtime(anyhow!("no records in {}", args.data.display())));
    }
    for record in &mut records {
        record.music_audio_path = anchor(&args.data, &record.music_audio_path);
    }

    let outcome = train(&records, &cfg).map_err(runtime)?;
    save_checkpoint(
        &args.out,
        &Checkpoint {
            params: outcome.params,
            vocab: outcome.vocab,
            frame_rate: cfg.frame_rate,
        },
    )
    .map_err(runtime)?;
    let history_path = args.out.with_extension("loss.csv");
    write_history(&history_path, &outcome.history).map_err(runtime)?;

    let first = outcome.history.first().expect("history is never empty");
    let last = outcome.history.last().expect("history is never empty");
    println!(
        "l_total {:.6} -> {:.6} over {} steps ({} records)",
        first.l_total,
        last.l_total,
        cfg.steps,
        records.len()
    );
    println!(
        "checkpoint -> {} (loss history -> {})",
        args.out.display(),
        history_path.display()
    );
    Ok(())
}
