//! `curate`: rule-filter, near-duplicate-drop, and stratified-split merged
//! datasets into train and eval files plus an audit trail.

use std::collections::BTreeSet;
use std::path::PathBuf;

use anyhow::anyhow;
use cadenza_core::clients::offline::TrigramEmbedder;
use cadenza_core::clients::limit::Bounded;
use cadenza_core::curate::{
    manifest_stats, render_stats, rule_filter, similarity_filter, split_holdout, CurationRules,
    DEFAULT_SIMILARITY_THRESHOLD, STAT_CELLS,
};
use cadenza_core::model::{read_records, write_records, DatasetRecord};
use clap::Args;
use serde_json::json;

use crate::config::{runtime, usage, CliError, Settings};
use crate::paths::{audit_path, require_file, write_audit};

#[derive(Debug, Args)]
pub struct CurateArgs {
    /// Input datasets (JSONL); repeatable.
    #[arg(long = "in", value_name = "JSONL", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    /// Curated training split (JSONL).
    #[arg(long)]
    pub out_train: PathBuf,
    /// Curated held-out split (JSONL).
    #[arg(long)]
    pub out_eval: PathBuf,
    /// Cosine-similarity threshold above which the later record is dropped.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Fraction of each (source, lang) stratum held out for eval.
    #[arg(long)]
    pub eval_frac: Option<f64>,
    /// Split seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn run(args: &CurateArgs, settings: &Settings) -> Result<(), CliError> {
    let threshold = settings.f64_setting(args.threshold, "threshold", DEFAULT_SIMILARITY_THRESHOLD)?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(usage(format!(
            "--threshold must lie in [0, 1], got {threshold}"
        )));
    }
    let eval_frac = settings.f64_setting(args.eval_frac, "eval_frac", 0.10)?;
    if !(eval_frac > 0.0 && eval_frac < 1.0) {
        return Err(usage(format!(
            "--eval-frac must lie strictly between 0 and 1, got {eval_frac}"
        )));
    }
    let seed = settings.u64_setting(args.seed, "seed", 0)?;
    for input in &args.inputs {
        require_file(input)?;
    }

    let mut merged: Vec<DatasetRecord> = Vec::new();
    let mut seen = BTreeSet::new();
    for input in &args.inputs {
        let records = read_records(input)
            .map_err(|e| runtime(anyhow!("{}: {e}", input.display())))?;
        for record in records {
            if !seen.insert(record.id.clone()) {
                return Err(runtime(anyhow!(
                    "duplicate record id `{}` across inputs",
                    record.id
                )));
            }
            merged.push(record);
        }
    }

    let (rule_kept, rule_drops) = rule_filter(&merged, &CurationRules::default());
    let embedder = Bounded::new(TrigramEmbedder, settings.jobs);
    let (kept, similarity_drops) =
        similarity_filter(&rule_kept, &embedder, threshold).map_err(runtime)?;
    let (train, eval) = split_holdout(&kept, eval_frac, seed).map_err(runtime)?;

    write_records(&train, &args.out_train).map_err(runtime)?;
    write_records(&eval, &args.out_eval).map_err(runtime)?;

    let stats = manifest_stats(&kept);
    let stat_rows: Vec<_> = STAT_CELLS
        .iter()
        .map(|&(source, lang)| {
            json!({
                "source": source.to_string(),
                "lang": lang.to_string(),
                "records": stats.count(source, lang),
            })
        })
        .collect();
    let audit = audit_path(&args.out_train);
    write_audit(
        &audit,
        &json!({
            "command": "curate",
            "inputs": args.inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
            "input_records": merged.len(),
            "rule_drops": rule_drops,
            "similarity_drops": similarity_drops,
            "kept": kept.len(),
            "train": train.len(),
            "eval": eval.len(),
            "threshold": threshold,
            "eval_frac": eval_frac,
            "seed": seed,
            "stats": stat_rows,
        }),
    )?;

    print!("{}", render_stats(&stats));
    println!(
        "kept {} of {} ({} rule drops, {} near-duplicates) -> {} train / {} eval",
        kept.len(),
        merged.len(),
        rule_drops.len(),
        similarity_drops.len(),
        train.len(),
        eval.len()
    );
    Ok(())
}
