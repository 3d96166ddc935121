//! Turns dataset records into id sequences the trainer consumes: a
//! character-level text vocabulary with reserved begin/end ids, and prepared
//! per-record batches of music-context, persona, text-target, and
//! speech-target tokens.

use std::collections::HashMap;

use crate::audio::{downmix_mono, slice, tokenize_audio, TokenSeq};
use crate::model::DatasetRecord;
use crate::wav::load_wav;

use super::TrainError;

/// Begin-of-sequence id, the step-0 predecessor in both vocabularies.
pub const BOS: usize = 0;
/// End-of-sequence id, appended to every target sequence.
pub const EOS: usize = 1;
/// Ids set aside at the bottom of each vocabulary (BOS and EOS).
pub const RESERVED_IDS: usize = 2;

/// Character-level text vocabulary; real characters start at id
/// [`RESERVED_IDS`], in sorted scalar-value order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TextVocab {
    chars: Vec<char>,
    ids: HashMap<char, usize>,
}

impl TextVocab {
    /// Builds the vocabulary from the distinct characters of `texts`.
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut chars: Vec<char> = texts
            .into_iter()
            .flat_map(|t| t.chars())
            .collect::<std::collections::BTreeSet<char>>()
            .into_iter()
            .collect();
        chars.shrink_to_fit();
        Self::from_chars(chars)
    }

    /// Covers every character of the records' critique texts and persona
    /// descriptions.
    pub fn from_records(records: &[DatasetRecord]) -> Self {
        Self::from_texts(
            records
                .iter()
                .flat_map(|r| [r.target_text.as_str(), r.persona.description.as_str()]),
        )
    }

    /// Rebuilds a vocabulary from its sorted character list (checkpoints).
    pub fn from_chars(chars: Vec<char>) -> Self {
        let ids = chars
            .iter()
            .enumerate()
            .map(|(i, &c)| (c, RESERVED_IDS + i))
            .collect();
        TextVocab { chars, ids }
    }

    /// Vocabulary size including the reserved ids.
    pub fn size(&self) -> usize {
        RESERVED_IDS + self.chars.len()
    }

    /// The non-reserved characters, in id order.
    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    /// Maps text to ids, rejecting characters outside the vocabulary.
    pub fn encode(&self, text: &str) -> Result<Vec<usize>, TrainError> {
        text.chars()
            .map(|c| {
                self.ids.get(&c).copied().ok_or_else(|| {
                    TrainError::Data(format!("character {c:?} is not in the text vocabulary"))
                })
            })
            .collect()
    }

    /// Maps generated ids back to text; reserved ids are not decodable.
    pub fn decode(&self, ids: &[usize]) -> Result<String, TrainError> {
        ids.iter()
            .map(|&id| {
                id.checked_sub(RESERVED_IDS)
                    .and_then(|i| self.chars.get(i))
                    .copied()
                    .ok_or(TrainError::TokenRange {
                        id,
                        vocab: self.size(),
                    })
            })
            .collect()
    }
}

/// One record, fully tokenized for training.
#[derive(Debug, Clone)]
pub struct TrainBatch {
    /// Record id, kept for error reporting.
    pub id: String,
    /// Music-context tokens straight from the audio tokenizer.
    pub music_tokens: TokenSeq,
    /// Persona description as text-vocabulary ids (no terminator; context).
    pub persona_tokens: Vec<usize>,
    /// Critique text as text-vocabulary ids, EOS-terminated.
    pub text_targets: Vec<usize>,
    /// Reaction-speech tokens as audio-vocabulary ids, EOS-terminated.
    pub audio_targets: Vec<usize>,
}

impl TrainBatch {
    /// Music tokens as audio-vocabulary ids (tokenizer bins shifted past the
    /// reserved ids).
    pub fn music_ids(&self) -> Vec<usize> {
        self.music_tokens
            .tokens
            .iter()
            .map(|&t| t as usize + RESERVED_IDS)
            .collect()
    }
}

fn data_err(id: &str, err: impl std::fmt::Display) -> TrainError {
    TrainError::Data(format!("record {id}: {err}"))
}

/// Tokenizes every record that carries reaction speech; records without a
/// speech target are skipped with a log line. Errors if none remain.
pub fn prepare_batches(
    records: &[DatasetRecord],
    vocab: &TextVocab,
    tok_vocab: u32,
    frame_rate: u32,
) -> Result<Vec<TrainBatch>, TrainError> {
    let mut batches = Vec::new();
    for rec in records {
        let Some(speech_path) = &rec.target_speech_path else {
            log::debug!("record {}: no reaction speech, skipped for training", rec.id);
            continue;
        };
        let music = load_wav(&rec.music_audio_path).map_err(|e| data_err(&rec.id, e))?;
        let music = slice(&music, rec.music_start_s, rec.music_end_s)
            .map_err(|e| data_err(&rec.id, e))?;
        let music_tokens = tokenize_audio(&downmix_mono(&music), tok_vocab, frame_rate)
            .map_err(|e| data_err(&rec.id, e))?;

        let speech = load_wav(speech_path).map_err(|e| data_err(&rec.id, e))?;
        let speech_tokens = tokenize_audio(&downmix_mono(&speech), tok_vocab, frame_rate)
            .map_err(|e| data_err(&rec.id, e))?;
        let mut audio_targets: Vec<usize> = speech_tokens
            .tokens
            .iter()
            .map(|&t| t as usize + RESERVED_IDS)
            .collect();
        audio_targets.push(EOS);

        let mut text_targets = vocab
            .encode(&rec.target_text)
            .map_err(|e| data_err(&rec.id, e))?;
        text_targets.push(EOS);
        let persona_tokens = vocab
            .encode(&rec.persona.description)
            .map_err(|e| data_err(&rec.id, e))?;

        batches.push(TrainBatch {
            id: rec.id.clone(),
            music_tokens,
            persona_tokens,
            text_targets,
            audio_targets,
        });
    }
    if batches.is_empty() {
        return Err(TrainError::Data(
            "no record carries reaction speech to train on".into(),
        ));
    }
    Ok(batches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{detokenize_audio, AudioClip};
    use crate::model::test_support::sample_record;
    use crate::wav::save_wav;

    #[test]
    fn vocabulary_is_sorted_deduplicated_and_reserved_aware() {
        let v = TextVocab::from_texts(["ba", "ab!"]);
        assert_eq!(v.chars(), ['!', 'a', 'b']);
        assert_eq!(v.size(), 5);
        assert_eq!(v.encode("ab!").unwrap(), vec![3, 4, 2]);
        assert_eq!(v.decode(&[3, 4, 2]).unwrap(), "ab!");
    }

    #[test]
    fn unknown_character_and_reserved_id_are_rejected() {
        let v = TextVocab::from_texts(["abc"]);
        let err = v.encode("abz").unwrap_err();
        assert!(err.to_string().contains("'z'"), "{err}");
        assert!(matches!(
            v.decode(&[BOS]),
            Err(TrainError::TokenRange { id: 0, .. })
        ));
        assert!(matches!(v.decode(&[99]), Err(TrainError::TokenRange { .. })));
    }

    #[test]
    fn encode_decode_round_trips_mixed_scripts() {
        let text = "嗓音 bright,有穿透力!";
        let v = TextVocab::from_texts([text]);
        assert_eq!(v.decode(&v.encode(text).unwrap()).unwrap(), text);
    }

    #[test]
    fn vocab_covers_personas_too() {
        let mut rec = sample_record("r1");
        rec.target_text = "abc".into();
        rec.persona.description = "xyz".into();
        let v = TextVocab::from_records(&[rec]);
        assert_eq!(v.chars(), ['a', 'b', 'c', 'x', 'y', 'z']);
    }

    fn write_music(dir: &std::path::Path, name: &str, amplitude: f64) -> String {
        let clip = AudioClip::new(vec![amplitude; 1600], 8000, 1).unwrap();
        let path = dir.join(name);
        save_wav(&clip, &path).unwrap();
        path.to_string_lossy().into_owned()
    }

    fn write_speech(dir: &std::path::Path, name: &str, tokens: &[u32]) -> String {
        let seq = TokenSeq::new(tokens.to_vec(), 64, 50).unwrap();
        let clip = detokenize_audio(&seq).unwrap();
        let path = dir.join(name);
        save_wav(&clip, &path).unwrap();
        path.to_string_lossy().into_owned()
    }

    #[test]
    fn prepare_tokenizes_and_terminates_targets() {
        let dir = tempfile::tempdir().unwrap();
        let mut rec = sample_record("r1");
        rec.music_audio_path = write_music(dir.path(), "m.wav", 0.5);
        rec.music_start_s = 0.0;
        rec.music_end_s = 0.2;
        rec.target_speech_path = Some(write_speech(dir.path(), "s.wav", &[10, 20, 30]));
        rec.target_text = "ok".into();
        rec.persona.description = "keen".into();

        let vocab = TextVocab::from_records(std::slice::from_ref(&rec));
        let batches = prepare_batches(&[rec], &vocab, 64, 50).unwrap();
        assert_eq!(batches.len(), 1);
        let b = &batches[0];
        // 0.2 s at 50 tokens/s is 10 music frames of one constant bin.
        assert_eq!(b.music_tokens.tokens.len(), 10);
        assert_eq!(b.music_ids().len(), 10);
        assert!(b.music_ids().iter().all(|&id| id >= RESERVED_IDS));
        // Speech built from known tokens comes back exactly, shifted, + EOS.
        assert_eq!(b.audio_targets, vec![12, 22, 32, EOS]);
        assert_eq!(b.text_targets.last(), Some(&EOS));
        assert_eq!(b.text_targets.len(), "ok".chars().count() + 1);
        assert_eq!(vocab.decode(&b.text_targets[..2]).unwrap(), "ok");
        assert_eq!(b.persona_tokens.len(), 4);
    }

    #[test]
    fn speechless_records_are_skipped_and_all_skipped_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mut with = sample_record("with");
        with.music_audio_path = write_music(dir.path(), "m1.wav", 0.2);
        with.music_start_s = 0.0;
        with.music_end_s = 0.1;
        with.target_speech_path = Some(write_speech(dir.path(), "s1.wav", &[7]));
        let mut without = sample_record("without");
        without.music_audio_path = write_music(dir.path(), "m2.wav", 0.2);
        without.music_start_s = 0.0;
        without.music_end_s = 0.1;
        without.target_speech_path = None;

        let vocab = TextVocab::from_records(&[with.clone(), without.clone()]);
        let batches = prepare_batches(&[with, without.clone()], &vocab, 64, 50).unwrap();
        assert_eq!(batches.len(), 1);
        assert_eq!(batches[0].id, "with");

        let err = prepare_batches(&[without], &vocab, 64, 50).unwrap_err();
        assert!(matches!(err, TrainError::Data(_)));
        assert!(err.to_string().contains("reaction speech"));
    }

    #[test]
    fn missing_music_file_names_the_record() {
        let dir = tempfile::tempdir().unwrap();
        let mut rec = sample_record("ghost");
        rec.music_audio_path = dir
            .path()
            .join("nope.wav")
            .to_string_lossy()
            .into_owned();
        rec.target_speech_path = Some(write_speech(dir.path(), "s.wav", &[3]));
        let vocab = TextVocab::from_records(std::slice::from_ref(&rec));
        let err = prepare_batches(&[rec], &vocab, 64, 50).unwrap_err();
        assert!(err.to_string().contains("ghost"), "{err}");
    }
}
