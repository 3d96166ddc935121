//! Model-written critiques: assemble the generation prompt around a persona
//! and song metadata, call the chat service once per music clip, and emit
//! dataset records.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::{self, AudioClip};
use crate::clients::{ChatClient, ChatMessage, ChatParams, ClientError};
use crate::model::{
    validate_record_with_genres, DatasetRecord, Lang, Persona, SongMetadata, Source, MAX_MUSIC_S,
};
use crate::wav;

/// The generation prompt template, shipped verbatim as an asset.
pub const GENERATION_TEMPLATE: &str = include_str!("../prompts/generation/base.txt");

/// Placeholder inside [`GENERATION_TEMPLATE`] that receives the persona.
pub const PERSONA_SLOT: &str = "<Persona Discription>";

/// User message sent when the chat backend cannot accept audio.
pub const NO_AUDIO_FALLBACK: &str =
    "The music clip could not be attached; review from the song context alone.";

/// One pending generation: which music to review, as whom, in which language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CritiqueStub {
    pub id: String,
    pub lang: Lang,
    pub music_audio_path: String,
    pub music_start_s: f64,
    pub music_end_s: f64,
    pub persona: Persona,
    pub song_meta: SongMetadata,
    #[serde(default)]
    pub separated: bool,
}

/// Errors from critique generation.
#[derive(Debug, Error)]
pub enum CritiqueError {
    #[error("music interval {0} s exceeds the {MAX_MUSIC_S} s bound")]
    IntervalTooLong(f64),
    #[error("loading music: {0}")]
    Audio(String),
    #[error("chat call failed: {0}")]
    Chat(#[from] ClientError),
    #[error("model returned an empty reply")]
    EmptyReply,
    #[error("generated record invalid: {}", .0.join("; "))]
    InvalidRecord(Vec<String>),
}

/// Renders the generation prompt: the shipped template with the persona slot
/// replaced by `persona.description`, followed by a labeled song-context
/// block. No other template byte changes.
pub fn build_generation_prompt(persona: &Persona, meta: &SongMetadata) -> String {
    let mut prompt = GENERATION_TEMPLATE.replace(PERSONA_SLOT, &persona.description);
    prompt.push_str("\n## Song Context\n");
    prompt.push_str(&format!("Title: {}\n", meta.title));
    prompt.push_str(&format!("Composer: {}\n", meta.composer));
    prompt.push_str(&format!("Genre: {}\n", meta.genre));
    prompt.push_str(&format!("Background: {}\n", meta.background));
    prompt.push_str(&format!("Tags: {}\n", meta.tags.join(", ")));
    prompt
}

/// Loads, slices, and downmixes the music a stub points at.
pub fn load_stub_music(stub: &CritiqueStub) -> Result<AudioClip, CritiqueError> {
    let full = wav::load_wav(&stub.music_audio_path).map_err(|e| CritiqueError::Audio(e.to_string()))?;
    let cut = audio::slice(&full, stub.music_start_s, stub.music_end_s)
        .map_err(|e| CritiqueError::Audio(e.to_string()))?;
    Ok(audio::downmix_mono(&cut))
}

/// The exact message list a generation request sends: the assembled prompt
/// as the system message, then the clip (or the no-audio fallback note) as
/// the user message.
pub fn generation_messages(
    stub: &CritiqueStub,
    music: &AudioClip,
    attach_audio: bool,
) -> Vec<ChatMessage> {
    let prompt = build_generation_prompt(&stub.persona, &stub.song_meta);
    let user = if attach_audio {
        ChatMessage::user_audio(music.clone())
    } else {
        ChatMessage::user(NO_AUDIO_FALLBACK)
    };
    vec![ChatMessage::system(prompt), user]
}

/// Counts length in the unit the language is measured in: whitespace-split
/// words for English, non-whitespace characters for Chinese.
fn reply_length(text: &str, lang: Lang) -> (usize, &'static str, usize, usize) {
    match lang {
        Lang::En => (text.split_whitespace().count(), "words", 300, 500),
        Lang::Zh => (
            text.chars().filter(|c| !c.is_whitespace()).count(),
            "characters",
            300,
            600,
        ),
    }
}

/// Generates one critique record. The reply length is logged and warned
/// about when outside the target range, but never rejected for length.
pub fn generate_critique(
    stub: &CritiqueStub,
    chat: &dyn ChatClient,
    params: &ChatParams,
    genres: &[&str],
) -> Result<DatasetRecord, CritiqueError> {
    let interval = stub.music_end_s - stub.music_start_s;
    if interval > MAX_MUSIC_S {
        return Err(CritiqueError::IntervalTooLong(interval));
    }
    let music = load_stub_music(stub)?;
    let attach_audio = chat.supports_audio();
    if !attach_audio {
        log::warn!(
            "stub {}: chat backend cannot take audio; falling back to metadata only",
            stub.id
        );
    }
    let messages = generation_messages(stub, &music, attach_audio);
    let reply = chat.chat(&messages, params)?;
    if reply.is_empty() {
        return Err(CritiqueError::EmptyReply);
    }
    let (len, unit, lo, hi) = reply_length(&reply, stub.lang);
    log::info!("stub {}: reply length {len} {unit}", stub.id);
    if len < lo || len > hi {
        log::warn!("stub {}: reply length {len} {unit} outside target [{lo}, {hi}]", stub.id);
    }
    let record = DatasetRecord {
        id: stub.id.clone(),
        source: Source::Mllm,
        lang: stub.lang,
        music_audio_path: stub.music_audio_path.clone(),
        music_start_s: stub.music_start_s,
        music_end_s: stub.music_end_s,
        persona: stub.persona.clone(),
        song_meta: stub.song_meta.clone(),
        target_text: reply,
        target_speech_path: None,
        separated: stub.separated,
        extra: serde_json::Map::new(),
    };
    let violations = validate_record_with_genres(&record, genres);
    if !violations.is_empty() {
        return Err(CritiqueError::InvalidRecord(violations));
    }
    Ok(record)
}

/// A stub that failed during batch generation.
#[derive(Debug)]
pub struct GenerateFailure {
    pub stub_id: String,
    pub error: CritiqueError,
}

/// Generates a batch in parallel (bounded by the chat client's own in-flight
/// limit). Output record order follows stub order; failed stubs turn into
/// error entries instead of records.
pub fn generate_batch(
    stubs: &[CritiqueStub],
    chat: &dyn ChatClient,
    params: &ChatParams,
    genres: &[&str],
) -> (Vec<DatasetRecord>, Vec<GenerateFailure>) {
    let results: Vec<Result<DatasetRecord, GenerateFailure>> = stubs
        .par_iter()
        .map(|stub| {
            generate_critique(stub, chat, params, genres).map_err(|error| GenerateFailure {
                stub_id: stub.id.clone(),
                error,
            })
        })
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for result in results {
        match result {
            Ok(record) => records.push(record),
            Err(failure) => failures.push(failure),
        }
    }
    (records, failures)
}

/// Counts records per genre against a configured genre list; configured
/// genres always appear, with 0 when unused.
pub fn genre_coverage(
    records: &[DatasetRecord],
    genres: &[&str],
) -> std::collections::BTreeMap<String, usize> {
    let mut counts: std::collections::BTreeMap<String, usize> = genres
        .iter()
        .map(|g| (g.to_string(), 0))
        .collect();
    for record in records {
        *counts.entry(record.song_meta.genre.clone()).or_insert(0) += 1;
    }
    counts
}
