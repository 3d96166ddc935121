//! Reaction-recording geometry: the gap between two consecutive transcript
//! segments is the music under review. Over-long gaps are trimmed from the
//! end (keeping the part nearest the reaction), short gaps are discarded,
//! and each kept interval is attributed to the segment that follows it.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::audio::{self, AudioClip};
use crate::clients::SeparationClient;
use crate::model::{TimedTranscript, TranscriptSegment};

/// Longest music interval kept, seconds.
pub const DEFAULT_MAX_LEN_S: f64 = 30.0;
/// Shortest music interval kept, seconds.
pub const DEFAULT_MIN_LEN_S: f64 = 20.0;
/// ASR segments closer than this are one continuous reaction.
pub const DEFAULT_MERGE_GAP_S: f64 = 1.0;

/// A span of music between reactions, attributed to the reaction after it.
#[derive(Debug, Clone, PartialEq)]
pub struct MusicInterval {
    pub start_s: f64,
    pub end_s: f64,
    /// Transcript segment before the music; absent when the recording opens
    /// with music.
    pub preceding_reaction_index: Option<usize>,
    /// Transcript segment after the music; absent only for hand-built
    /// trailing intervals ([`music_intervals`] never emits those).
    pub following_reaction_index: Option<usize>,
}

impl MusicInterval {
    pub fn len_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// Merges adjacent segments separated by less than `merge_gap_s` into one
/// reaction (texts joined with a space).
///
/// Run this before [`music_intervals`] so interval indices refer to whole
/// reactions rather than arbitrary ASR splits.
pub fn merge_close_segments(transcript: &TimedTranscript, merge_gap_s: f64) -> TimedTranscript {
    let mut segments: Vec<TranscriptSegment> = Vec::new();
    for seg in &transcript.segments {
        match segments.last_mut() {
            Some(last) if seg.start_s - last.end_s < merge_gap_s => {
                last.text.push(' ');
                last.text.push_str(&seg.text);
                last.end_s = seg.end_s;
            }
            _ => segments.push(seg.clone()),
        }
    }
    TimedTranscript { segments }
}

/// Derives music intervals from the gaps of a valid transcript.
///
/// One candidate per gap between consecutive segments, plus the gap before
/// the first segment when the recording opens with music. Candidates longer
/// than `max_len_s` keep only their last `max_len_s`; candidates shorter
/// than `min_len_s` are discarded, as is any music after the final segment
/// (it has no reaction). `audio_duration_s` must be at least the last
/// segment's end.
pub fn music_intervals(
    transcript: &TimedTranscript,
    audio_duration_s: f64,
    max_len_s: f64,
    min_len_s: f64,
) -> Vec<MusicInterval> {
    debug_assert!(transcript.validate().is_ok(), "transcript must be valid");
    debug_assert!(audio_duration_s >= transcript.last_end_s());
    let mut candidates = Vec::new();
    if let Some(first) = transcript.segments.first() {
        if first.start_s > 0.0 {
            candidates.push((0.0, first.start_s, None, Some(0)));
        }
    }
    for (i, pair) in transcript.segments.windows(2).enumerate() {
        if pair[1].start_s > pair[0].end_s {
            candidates.push((pair[0].end_s, pair[1].start_s, Some(i), Some(i + 1)));
        }
    }
    if transcript.last_end_s() < audio_duration_s && !transcript.segments.is_empty() {
        log::debug!(
            "discarding trailing music ({:.3}-{:.3} s): no following reaction",
            transcript.last_end_s(),
            audio_duration_s
        );
    }
    candidates
        .into_iter()
        .filter_map(|(start_s, end_s, preceding, following)| {
            let start_s = if end_s - start_s > max_len_s {
                end_s - max_len_s
            } else {
                start_s
            };
            if end_s - start_s < min_len_s {
                log::debug!(
                    "discarding music interval {start_s:.3}-{end_s:.3} s: shorter than {min_len_s} s"
                );
                return None;
            }
            Some(MusicInterval {
                start_s,
                end_s,
                preceding_reaction_index: preceding,
                following_reaction_index: following,
            })
        })
        .collect()
}

/// One (music, reaction text, speech) sample cut from a reaction recording.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionTriplet {
    pub interval: MusicInterval,
    pub music: AudioClip,
    pub reaction_text: String,
    pub speech: AudioClip,
    pub speech_start_s: f64,
    pub speech_end_s: f64,
    pub separated: bool,
}

/// A per-interval failure that did not stop the batch.
#[derive(Debug, Clone)]
pub struct TripletError {
    /// Index into the intervals passed to [`build_triplets`].
    pub interval_index: usize,
    pub message: String,
}

impl std::fmt::Display for TripletError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "interval {}: {}", self.interval_index + 1, self.message)
    }
}

/// Result of [`build_triplets`]: completed triplets plus per-interval errors.
#[derive(Debug)]
pub struct BuildOutcome {
    pub triplets: Vec<ReactionTriplet>,
    pub errors: Vec<TripletError>,
}

/// Cuts one triplet per interval: music is the interval's slice (run through
/// the separation client with prompt "music" when `separate` is set), the
/// reaction is the attributed following segment, and speech is that
/// segment's slice. A failing interval is recorded and skipped; the rest of
/// the batch proceeds.
pub fn build_triplets(
    audio: &AudioClip,
    transcript: &TimedTranscript,
    intervals: &[MusicInterval],
    separate: bool,
    separation: &dyn SeparationClient,
) -> BuildOutcome {
    let mut outcome = BuildOutcome {
        triplets: Vec::new(),
        errors: Vec::new(),
    };
    for (index, interval) in intervals.iter().enumerate() {
        match build_one(audio, transcript, interval, separate, separation) {
            Ok(triplet) => outcome.triplets.push(triplet),
            Err(message) => {
                log::warn!("skipping interval {}: {message}", index + 1);
                outcome.errors.push(TripletError {
                    interval_index: index,
                    message,
                });
            }
        }
    }
    outcome
}

fn build_one(
    audio: &AudioClip,
    transcript: &TimedTranscript,
    interval: &MusicInterval,
    separate: bool,
    separation: &dyn SeparationClient,
) -> Result<ReactionTriplet, String> {
    let reaction_index = interval
        .following_reaction_index
        .ok_or("no following reaction")?;
    let segment = transcript
        .segments
        .get(reaction_index)
        .ok_or_else(|| format!("following reaction index {reaction_index} out of range"))?;
    if segment.text.is_empty() {
        return Err(format!("reaction segment {reaction_index} has empty text"));
    }
    let raw = audio::slice(audio, interval.start_s, interval.end_s)
        .map_err(|e| format!("slicing music: {e}"))?;
    let music = if separate {
        separation
            .separate(&raw, "music")
            .map_err(|e| format!("separation failed: {e}"))?
    } else {
        raw
    };
    let speech = audio::slice(audio, segment.start_s, segment.end_s)
        .map_err(|e| format!("slicing speech: {e}"))?;
    Ok(ReactionTriplet {
        interval: interval.clone(),
        music,
        reaction_text: segment.text.clone(),
        speech,
        speech_start_s: segment.start_s,
        speech_end_s: segment.end_s,
        separated: separate,
    })
}

/// Separation client that fails on one call ordinal (fault injection).
#[doc(hidden)]
pub struct FailingSeparator {
    calls: AtomicUsize,
    fail_on: usize,
}

impl FailingSeparator {
    /// Fails the `fail_on`-th call (1-based); other calls are identity.
    pub fn new(fail_on: usize) -> Self {
        FailingSeparator {
            calls: AtomicUsize::new(0),
            fail_on,
        }
    }
}

impl SeparationClient for FailingSeparator {
    fn separate(
        &self,
        audio: &AudioClip,
        _prompt: &str,
    ) -> Result<AudioClip, crate::clients::ClientError> {
        let call = self.calls.fetch_add(1, Ordering::SeqCst) + 1;
        if call == self.fail_on {
            Err(crate::clients::ClientError::Transport(
                "injected separation failure".into(),
            ))
        } else {
            Ok(audio.clone())
        }
    }
}
