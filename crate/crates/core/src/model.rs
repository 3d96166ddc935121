//! Shared domain types and the unified JSONL dataset format.
//!
//! Every pipeline stage exchanges [`DatasetRecord`]s: one JSON object per
//! line, stable field order, audio referenced by path + interval rather than
//! inlined. Unknown fields survive a read/write round trip.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard upper bound on a record's music interval, in seconds.
pub const MAX_MUSIC_S: f64 = 30.0;

/// Default ten-genre list; overridable wherever a genre list is accepted.
pub const DEFAULT_GENRES: [&str; 10] = [
    "pop",
    "rock",
    "jazz",
    "folk",
    "classical-crossover",
    "R&B",
    "hip-hop",
    "electronic",
    "opera",
    "musical-theatre",
];

/// Where a record's reaction text came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    /// Transcribed from a human reaction recording.
    Human,
    /// Generated by a multimodal LLM.
    Mllm,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Human => write!(f, "human"),
            Source::Mllm => write!(f, "mllm"),
        }
    }
}

/// Reaction language tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    Zh,
    En,
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lang::Zh => write!(f, "zh"),
            Lang::En => write!(f, "en"),
        }
    }
}

/// A critic persona: aesthetic preferences and linguistic style.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub name: String,
    pub description: String,
}

/// Song attributes supplied alongside each clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SongMetadata {
    pub title: String,
    pub background: String,
    pub composer: String,
    pub genre: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

/// One ordered speech segment of an ASR transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSegment {
    pub text: String,
    pub start_s: f64,
    pub end_s: f64,
}

/// ASR output: ordered, non-overlapping speech segments with timestamps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimedTranscript {
    pub segments: Vec<TranscriptSegment>,
}

impl TimedTranscript {
    /// Checks segment ordering and pairwise non-overlap; returns the first
    /// problem found.
    pub fn validate(&self) -> Result<(), String> {
        for (i, seg) in self.segments.iter().enumerate() {
            if !(seg.start_s >= 0.0 && seg.start_s < seg.end_s) {
                return Err(format!(
                    "segment {i}: need 0 <= start_s < end_s, got [{}, {}]",
                    seg.start_s, seg.end_s
                ));
            }
            if i > 0 && seg.start_s < self.segments[i - 1].end_s {
                return Err(format!(
                    "segment {i} starts at {} before segment {} ends at {}",
                    seg.start_s,
                    i - 1,
                    self.segments[i - 1].end_s
                ));
            }
        }
        Ok(())
    }

    /// End time of the last segment, or 0 for an empty transcript.
    pub fn last_end_s(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end_s)
    }
}

/// The unified on-disk record: one (music, persona, text, speech) tuple.
///
/// Audio is stored by reference (path + interval). `extra` carries any
/// unknown fields so they are preserved on rewrite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub source: Source,
    pub lang: Lang,
    pub music_audio_path: String,
    pub music_start_s: f64,
    pub music_end_s: f64,
    pub persona: Persona,
    pub song_meta: SongMetadata,
    pub target_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_speech_path: Option<String>,
    pub separated: bool,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

impl DatasetRecord {
    /// Length of the referenced music interval in seconds.
    pub fn music_duration_s(&self) -> f64 {
        self.music_end_s - self.music_start_s
    }
}

/// Errors from dataset persistence.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("record '{id}' failed validation: {}", violations.join("; "))]
    Validation { id: String, violations: Vec<String> },
    #[error("duplicate record id '{id}'")]
    DuplicateId { id: String },
}

/// Checks every typed invariant of a record against the default genre list.
///
/// Returns one human-readable violation per broken invariant; an empty list
/// means the record is valid.
pub fn validate_record(record: &DatasetRecord) -> Vec<String> {
    validate_record_with_genres(record, &DEFAULT_GENRES)
}

/// [`validate_record`] with a caller-supplied genre list.
pub fn validate_record_with_genres(record: &DatasetRecord, genres: &[&str]) -> Vec<String> {
    let mut violations = Vec::new();
    if record.id.is_empty() {
        violations.push("id must be non-empty".to_string());
    }
    if record.music_start_s < 0.0 {
        violations.push(format!(
            "music_start_s must be >= 0, got {}",
            record.music_start_s
        ));
    }
    let dur = record.music_duration_s();
    if !(dur > 0.0) {
        violations.push(format!(
            "music interval must have positive length, got music_end_s - music_start_s = {dur}"
        ));
    } else if dur > MAX_MUSIC_S {
        violations.push(format!(
            "music interval of {dur:.3} s exceeds the {MAX_MUSIC_S} s bound \
             (music_start_s = {}, music_end_s = {})",
            record.music_start_s, record.music_end_s
        ));
    }
    if record.target_text.is_empty() {
        violations.push("target_text must be non-empty".to_string());
    }
    if record.source == Source::Mllm && record.target_speech_path.is_some() {
        violations.push("target_speech_path must be absent when source = mllm".to_string());
    }
    if record.persona.description.is_empty() {
        violations.push("persona.description must be non-empty".to_string());
    }
    if record.song_meta.title.is_empty() {
        violations.push("song_meta.title must be non-empty".to_string());
    }
    if !genres.iter().any(|g| *g == record.song_meta.genre) {
        violations.push(format!(
            "song_meta.genre '{}' is not in the configured genre list",
            record.song_meta.genre
        ));
    }
    violations
}

/// Writes records as JSONL, one UTF-8 object per line in stable field order.
///
/// Every record is validated first; the first invalid or duplicate id aborts
/// the write before any output is produced. Returns the number written.
pub fn write_records<P: AsRef<Path>>(
    records: &[DatasetRecord],
    path: P,
) -> Result<usize, ModelError> {
    let mut seen = HashSet::new();
    for record in records {
        let violations = validate_record(record);
        if !violations.is_empty() {
            return Err(ModelError::Validation {
                id: record.id.clone(),
                violations,
            });
        }
        if !seen.insert(record.id.as_str()) {
            return Err(ModelError::DuplicateId {
                id: record.id.clone(),
            });
        }
    }
    let mut out = BufWriter::new(File::create(path)?);
    for record in records {
        let line = serde_json::to_string(record).map_err(|e| ModelError::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(records.len())
}

/// Reads and validates a JSONL record file.
///
/// Parse errors carry the 1-based line number; the serde message names any
/// missing field. Records are returned in file order.
pub fn read_records<P: AsRef<Path>>(path: P) -> Result<Vec<DatasetRecord>, ModelError> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord =
            serde_json::from_str(&line).map_err(|e| ModelError::Parse {
                line: idx + 1,
                message: e.to_string(),
            })?;
        let violations = validate_record(&record);
        if !violations.is_empty() {
            return Err(ModelError::Validation {
                id: record.id.clone(),
                violations,
            });
        }
        if !seen.insert(record.id.clone()) {
            return Err(ModelError::DuplicateId { id: record.id });
        }
        records.push(record);
    }
    Ok(records)
}
