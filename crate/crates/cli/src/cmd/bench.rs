//! `bench scq` / `bench oeq`: run the quiz and rubric-judge benchmarks and
//! write report files (markdown, CSV, metadata JSON) into a directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use cadenza_core::audio::{downmix_mono, slice};
use cadenza_core::clients::{ChatClient, ChatMessage, ChatParams, ClientError};
use cadenza_core::critique::{generation_messages, load_stub_music, CritiqueStub};
use cadenza_core::judge::{
    judge_prompt_hashes, load_scq, run_oeq, run_scq, OeqReport, ScqItem, ScqReport,
};
use cadenza_core::model::{read_records, DatasetRecord};
use cadenza_core::wav::load_wav;
use clap::{Args, Subcommand};
use serde_json::json;

use crate::backends::{judge_backend, live_chat, resolve_backend_name};
use crate::config::{runtime, usage, CliError, Settings};
use crate::paths::{anchor, require_file};

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Single-choice music-knowledge quiz accuracy.
    Scq(ScqArgs),
    /// Open-ended critique quality scored by a rubric judge.
    Oeq(OeqArgs),
}

#[derive(Debug, Args)]
pub struct ScqArgs {
    /// Quiz bank (JSONL).
    #[arg(long)]
    pub items: PathBuf,
    /// Answering model name, or `mock` for the deterministic stub.
    #[arg(long)]
    pub model: Option<String>,
    /// Report directory.
    #[arg(long)]
    pub report: PathBuf,
    /// Shorthand for `--model mock`.
    #[arg(long)]
    pub mock: bool,
}

#[derive(Debug, Args)]
pub struct OeqArgs {
    /// Evaluation dataset (JSONL).
    #[arg(long)]
    pub eval: PathBuf,
    /// Critique model name, or `mock` to echo each record's reference text.
    #[arg(long)]
    pub model: Option<String>,
    /// Judge model name, or `mock` for the deterministic rubric stub.
    #[arg(long)]
    pub judge: Option<String>,
    /// Report directory.
    #[arg(long)]
    pub report: PathBuf,
    /// Judge trials per item (scores averaged).
    #[arg(long)]
    pub trials: Option<usize>,
    /// Shorthand for `--model mock --judge mock`.
    #[arg(long)]
    pub mock: bool,
}

/// FNV-1a over the item id; keeps the mock answerer deterministic per item.
fn fnv64(text: &str) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for b in text.bytes() {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn mock_scq_reply(item: &ScqItem) -> String {
    let idx = (fnv64(&item.id) as usize) % item.options.len();
    format!("The answer is {}.", item.options[idx].letter)
}

fn scq_messages(item: &ScqItem, items_path: &Path) -> Result<Vec<ChatMessage>, ClientError> {
    let mut prompt = format!("{}\n", item.question);
    for option in &item.options {
        prompt.push_str(&format!("{}. {}\n", option.letter, option.text));
    }
    prompt.push_str("Listen to the clip and reply with the letter of the correct option.");
    let path = anchor(items_path, &item.audio_ref.path);
    let clip = load_wav(&path)
        .map_err(|e| ClientError::InvalidInput(format!("audio for {}: {e}", item.id)))?;
    let clip = slice(&downmix_mono(&clip), item.audio_ref.start_s, item.audio_ref.end_s)
        .map_err(|e| ClientError::InvalidInput(format!("audio for {}: {e}", item.id)))?;
    Ok(vec![
        ChatMessage::system("You are answering a single-choice quiz about a song clip."),
        ChatMessage::user_audio(clip),
        ChatMessage::user(prompt),
    ])
}

fn write_scq_reports(
    dir: &Path,
    model: &str,
    items_path: &Path,
    report: &ScqReport,
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(runtime)?;
    let mut md = String::from("# Quiz benchmark (single-choice)\n\n");
    md.push_str(&format!(
        "Model: {model}\nItems: {}\nAccuracy: {:.3} ({}/{})\n\n",
        items_path.display(),
        report.accuracy,
        report.correct,
        report.total
    ));
    md.push_str("| Category | Correct | Total | Accuracy |\n| --- | --- | --- | --- |\n");
    for (category, score) in &report.per_category {
        md.push_str(&format!(
            "| {category} | {} | {} | {:.3} |\n",
            score.correct,
            score.total,
            score.accuracy()
        ));
    }
    fs::write(dir.join("scq_report.md"), md).map_err(runtime)?;

    let mut csv = csv::Writer::from_path(dir.join("scq_items.csv")).map_err(runtime)?;
    csv.write_record(["id", "answer", "extracted", "correct", "note"])
        .map_err(runtime)?;
    for row in &report.log {
        csv.write_record([
            row.id.as_str(),
            &row.answer.to_string(),
            &row.extracted.map(|c| c.to_string()).unwrap_or_default(),
            if row.correct { "true" } else { "false" },
            row.note.as_deref().unwrap_or(""),
        ])
        .map_err(runtime)?;
    }
    csv.flush().map_err(runtime)?;

    let meta = json!({
        "benchmark": "scq",
        "model": model,
        "items": report.total,
        "correct": report.correct,
        "accuracy": report.accuracy,
        "per_category": report.per_category,
    });
    fs::write(
        dir.join("scq_metadata.json"),
        serde_json::to_string_pretty(&meta).map_err(runtime)? + "\n",
    )
    .map_err(runtime)
}

pub fn run_scq_cmd(args: &ScqArgs, settings: &Settings) -> Result<(), CliError> {
    let model = resolve_backend_name(args.model.as_deref(), "model", args.mock, settings)?;
    require_file(&args.items)?;
    let items = load_scq(&args.items).map_err(runtime)?;
    let report = if model == "mock" {
        run_scq(|item| Ok(mock_scq_reply(item)), &items)
    } else {
        let chat = live_chat(settings)?;
        let params = ChatParams {
            temperature: 0.0,
            ..ChatParams::default()
        };
        run_scq(
            |item| chat.chat(&scq_messages(item, &args.items)?, &params),
            &items,
        )
    }
    .map_err(runtime)?;
    write_scq_reports(&args.report, &model, &args.items, &report)?;
    println!(
        "SCQ accuracy: {:.3} ({}/{}) -> {}",
        report.accuracy,
        report.correct,
        report.total,
        args.report.display()
    );
    Ok(())
}

fn live_model_fn<'a>(
    chat: &'a dyn ChatClient,
) -> impl Fn(&DatasetRecord) -> Result<String, ClientError> + Sync + 'a {
    move |record| {
        let stub = CritiqueStub {
            id: record.id.clone(),
            lang: record.lang,
            music_audio_path: record.music_audio_path.clone(),
            music_start_s: record.music_start_s,
            music_end_s: record.music_end_s,
            persona: record.persona.clone(),
            song_meta: record.song_meta.clone(),
            separated: record.separated,
        };
        let music = load_stub_music(&stub)
            .map_err(|e| ClientError::InvalidInput(format!("music for {}: {e}", record.id)))?;
        chat.chat(&generation_messages(&stub, &music, true), &ChatParams::default())
    }
}

fn write_oeq_reports(
    dir: &Path,
    model: &str,
    judge: &str,
    trials: usize,
    report: &OeqReport,
) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(runtime)?;
    let mut md = String::from("# Critique benchmark (open-ended)\n\n");
    md.push_str(&format!(
        "Model: {model}\nJudge: {judge}\nScored: {} ({} excluded)\n\n",
        report.scored, report.excluded
    ));
    match &report.aggregate {
        Some(agg) => {
            md.push_str("| Dimension | Score |\n| --- | --- |\n");
            md.push_str(&format!("| Completeness | {:.3} |\n", agg.completeness));
            md.push_str(&format!("| Accuracy | {:.3} |\n", agg.accuracy));
            md.push_str(&format!("| Novelty | {:.3} |\n", agg.novelty));
            md.push_str(&format!("| Weighted Avg | {:.3} |\n", agg.weighted));
            md.push_str(&format!("| Unweighted Mean | {:.3} |\n", agg.unweighted_mean));
        }
        None => md.push_str("No items were scored.\n"),
    }
    fs::write(dir.join("report.md"), md).map_err(runtime)?;

    let mut csv = csv::Writer::from_path(dir.join("report.csv")).map_err(runtime)?;
    csv.write_record([
        "id",
        "completeness",
        "accuracy",
        "novelty",
        "weighted",
        "unweighted_mean",
        "no_facts",
        "note",
    ])
    .map_err(runtime)?;
    let score_row = |id: &str, s: &cadenza_core::judge::JudgeScores, no_facts: bool, note: &str| {
        [
            id.to_string(),
            s.completeness.to_string(),
            s.accuracy.to_string(),
            s.novelty.to_string(),
            s.weighted.to_string(),
            s.unweighted_mean.to_string(),
            no_facts.to_string(),
            note.to_string(),
        ]
    };
    for item in &report.per_item {
        let row = match &item.scores {
            Some(s) => score_row(
                &item.id,
                s,
                item.no_facts,
                item.note.as_deref().unwrap_or(""),
            ),
            None => [
                item.id.clone(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                item.no_facts.to_string(),
                item.note.as_deref().unwrap_or("").to_string(),
            ],
        };
        csv.write_record(&row).map_err(runtime)?;
    }
    if let Some(agg) = &report.aggregate {
        csv.write_record(&score_row("(aggregate)", agg, false, ""))
            .map_err(runtime)?;
    }
    csv.flush().map_err(runtime)?;

    fs::write(
        dir.join("oeq_items.json"),
        serde_json::to_string_pretty(&report.per_item).map_err(runtime)? + "\n",
    )
    .map_err(runtime)?;

    let hashes: serde_json::Map<String, serde_json::Value> = judge_prompt_hashes()
        .into_iter()
        .map(|(name, hash)| (name.to_string(), json!(hash)))
        .collect();
    let meta = json!({
        "benchmark": "oeq",
        "model": model,
        "judge": judge,
        "trials": trials,
        "judge_temperature": 0.0,
        "format_retries": 1,
        "prompt_assets": hashes,
        "scored": report.scored,
        "excluded": report.excluded,
        "valid": report.valid,
    });
    fs::write(
        dir.join("run_metadata.json"),
        serde_json::to_string_pretty(&meta).map_err(runtime)? + "\n",
    )
    .map_err(runtime)
}

pub fn run_oeq_cmd(args: &OeqArgs, settings: &Settings) -> Result<(), CliError> {
    let model = resolve_backend_name(args.model.as_deref(), "model", args.mock, settings)?;
    let judge_name = resolve_backend_name(args.judge.as_deref(), "judge", args.mock, settings)?;
    let trials = settings.usize_setting(args.trials, "trials", 1)?;
    if trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    require_file(&args.eval)?;
    let mut records = read_records(&args.eval).map_err(runtime)?;
    for record in &mut records {
        record.music_audio_path = anchor(&args.eval, &record.music_audio_path);
    }
    let judge = judge_backend(&judge_name, settings)?;
    let report = if model == "mock" {
        run_oeq(
            |record: &DatasetRecord| Ok(record.target_text.clone()),
            judge.as_ref(),
            &records,
            trials,
        )
    } else {
        let chat = live_chat(settings)?;
        run_oeq(live_model_fn(chat.as_ref()), judge.as_ref(), &records, trials)
    }
    .map_err(runtime)?;

    write_oeq_reports(&args.report, &model, &judge_name, trials, &report)?;
    match &report.aggregate {
        Some(agg) => println!(
            "OEQ weighted {:.3} / unweighted {:.3} ({} scored, {} excluded) -> {}",
            agg.weighted,
            agg.unweighted_mean,
            report.scored,
            report.excluded,
            args.report.display()
        ),
        None => println!(
            "OEQ: no items scored ({} excluded) -> {}",
            report.excluded,
            args.report.display()
        ),
    }
    if !report.valid {
        return Err(runtime(anyhow!(
            "{} of {} items excluded exceeds the failure budget; reports kept at {}",
            report.excluded,
            records.len(),
            args.report.display()
        )));
    }
    Ok(())
}
