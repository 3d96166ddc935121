//! `segment`: cut a reaction recording into music/reaction/speech triplet
//! records, writing clip media beside the output JSONL.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use cadenza_core::audio::downmix_mono;
use cadenza_core::model::{
    write_records, DatasetRecord, Lang, Persona, SongMetadata, Source, TimedTranscript,
    DEFAULT_GENRES,
};
use cadenza_core::segment::{
    build_triplets, merge_close_segments, music_intervals, DEFAULT_MAX_LEN_S, DEFAULT_MERGE_GAP_S,
    DEFAULT_MIN_LEN_S,
};
use cadenza_core::wav::{load_wav, save_wav};
use clap::Args;
use serde_json::json;

use crate::backends::separation_backend;
use crate::config::{runtime, usage, CliError, Settings};
use crate::paths::{audit_path, require_file, write_audit};

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Reaction recording (WAV).
    #[arg(long)]
    pub audio: PathBuf,
    /// Timed transcript of the reactor's speech (JSON).
    #[arg(long)]
    pub transcript: PathBuf,
    /// Output dataset (JSONL); clip media lands in `media/` beside it.
    #[arg(long)]
    pub out: PathBuf,
    /// Minimum music-interval length in seconds.
    #[arg(long, value_name = "SECONDS")]
    pub min_seg: Option<f64>,
    /// Maximum music-interval length in seconds (capped at 30).
    #[arg(long, value_name = "SECONDS")]
    pub max_seg: Option<f64>,
    /// Run music clips through the source-separation client.
    #[arg(long)]
    pub separate: bool,
    /// Use offline mock backends (no network, no keys).
    #[arg(long)]
    pub mock: bool,
    /// Record language: en or zh.
    #[arg(long)]
    pub lang: Option<String>,
    /// Song genre for the record metadata.
    #[arg(long)]
    pub genre: Option<String>,
    /// Song title for the record metadata.
    #[arg(long)]
    pub title: Option<String>,
    /// Reactor persona name.
    #[arg(long)]
    pub persona_name: Option<String>,
    /// Reactor persona description.
    #[arg(long)]
    pub persona_desc: Option<String>,
}

pub fn parse_lang(s: &str) -> Result<Lang, CliError> {
    match s {
        "en" => Ok(Lang::En),
        "zh" => Ok(Lang::Zh),
        other => Err(usage(format!("unsupported language `{other}` (en or zh)"))),
    }
}

pub fn run(args: &SegmentArgs, settings: &Settings) -> Result<(), CliError> {
    let min = settings.f64_setting(args.min_seg, "min_seg", DEFAULT_MIN_LEN_S)?;
    let max = settings.f64_setting(args.max_seg, "max_seg", DEFAULT_MAX_LEN_S)?;
    if !(min > 0.0 && min.is_finite()) {
        return Err(usage(format!("--min-seg must be positive, got {min}")));
    }
    if min > max {
        return Err(usage(format!(
            "--min-seg ({min}) must not exceed --max-seg ({max})"
        )));
    }
    if max > DEFAULT_MAX_LEN_S {
        return Err(usage(format!(
            "--max-seg must not exceed {DEFAULT_MAX_LEN_S} (dataset clip cap), got {max}"
        )));
    }
    require_file(&args.audio)?;
    require_file(&args.transcript)?;
    let lang = parse_lang(&settings.string_setting(args.lang.as_deref(), "lang", "en"))?;
    let genre = settings.string_setting(args.genre.as_deref(), "genre", "pop");
    if !DEFAULT_GENRES.contains(&genre.as_str()) {
        return Err(usage(format!(
            "unknown genre `{genre}`; expected one of {}",
            DEFAULT_GENRES.join(", ")
        )));
    }
    let title = settings.string_setting(args.title.as_deref(), "title", "untitled");
    let persona = Persona {
        name: settings.string_setting(args.persona_name.as_deref(), "persona_name", "listener"),
        description: settings.string_setting(
            args.persona_desc.as_deref(),
            "persona_desc",
            "an attentive listener who reacts to singing",
        ),
    };

    let audio = downmix_mono(&load_wav(&args.audio).map_err(runtime)?);
    let text = fs::read_to_string(&args.transcript).map_err(runtime)?;
    let transcript: TimedTranscript = serde_json::from_str(&text).map_err(runtime)?;
    transcript
        .validate()
        .map_err(|msg| runtime(anyhow!("invalid transcript: {msg}")))?;
    let duration = audio.duration_s();
    if duration < transcript.last_end_s() {
        return Err(runtime(anyhow!(
            "transcript runs past the audio ({:.3} s > {:.3} s)",
            transcript.last_end_s(),
            duration
        )));
    }

    let merged = merge_close_segments(&transcript, DEFAULT_MERGE_GAP_S);
    let intervals = music_intervals(&merged, duration, max, min);
    let separator = separation_backend(args.mock, args.separate, settings)?;
    let outcome = build_triplets(&audio, &merged, &intervals, args.separate, separator.as_ref());

    let stem = args
        .out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "segment".into());
    let parent = args.out.parent().unwrap_or(Path::new("")).to_path_buf();
    if !outcome.triplets.is_empty() {
        fs::create_dir_all(parent.join("media")).map_err(runtime)?;
    }
    let mut records = Vec::with_capacity(outcome.triplets.len());
    for (i, t) in outcome.triplets.iter().enumerate() {
        let base = format!("{stem}-{i:03}");
        let music_rel = format!("media/{base}.music.wav");
        let speech_rel = format!("media/{base}.speech.wav");
        save_wav(&t.music, parent.join(&music_rel)).map_err(runtime)?;
        save_wav(&t.speech, parent.join(&speech_rel)).map_err(runtime)?;
        records.push(DatasetRecord {
            id: base,
            source: Source::Human,
            lang,
            music_audio_path: music_rel,
            music_start_s: 0.0,
            music_end_s: t.music.duration_s().min(max),
            persona: persona.clone(),
            song_meta: SongMetadata {
                title: title.clone(),
                background: String::new(),
                composer: String::new(),
                genre: genre.clone(),
                tags: Vec::new(),
            },
            target_text: t.reaction_text.clone(),
            target_speech_path: Some(speech_rel),
            separated: t.separated,
            extra: Default::default(),
        });
    }
    write_records(&records, &args.out).map_err(runtime)?;
    println!(
        "{} records -> {} ({} intervals found)",
        records.len(),
        args.out.display(),
        intervals.len()
    );
    if !outcome.errors.is_empty() {
        let audit = audit_path(&args.out);
        let errors: Vec<_> = outcome
            .errors
            .iter()
            .map(|e| json!({"interval_index": e.interval_index, "message": e.message}))
            .collect();
        write_audit(&audit, &json!({"command": "segment", "errors": errors}))?;
        return Err(runtime(anyhow!(
            "{} of {} intervals failed; audit at {}",
            outcome.errors.len(),
            intervals.len(),
            audit.display()
        )));
    }
    Ok(())
}
