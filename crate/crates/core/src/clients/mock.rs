//! Deterministic offline backends driven by checked-in fixtures.
//!
//! Fixture layout: `<root>/{asr,sep,chat}/<request-hash>.json`. A request
//! whose hash has no fixture fails with an explicit no-fixture error rather
//! than fabricating output. All backends here are pure functions of their
//! inputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    chat_fingerprint, clip_fingerprint, separation_fingerprint, AsrClient, ChatClient,
    ChatMessage, ChatParams, ClientError, Content, SeparationClient,
};
use crate::audio::AudioClip;
use crate::model::TimedTranscript;
use crate::wav;

/// Tolerance on a transcript's final timestamp vs. clip duration.
const ASR_END_SLACK_S: f64 = 0.1;

fn read_fixture(path: &Path, service: &'static str, key: &str) -> Result<String, ClientError> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(text),
        Err(err) if err.kind() == std::io::ErrorKind::NotFound => Err(ClientError::NoFixture {
            service,
            key: key.to_string(),
        }),
        Err(err) => Err(ClientError::Transport(format!(
            "reading fixture {}: {err}",
            path.display()
        ))),
    }
}

fn parse_fixture<T: serde::de::DeserializeOwned>(
    text: &str,
    path: &Path,
) -> Result<T, ClientError> {
    serde_json::from_str(text).map_err(|err| ClientError::Protocol {
        message: format!("malformed fixture {}: {err}", path.display()),
        payload_excerpt: text.chars().take(120).collect(),
    })
}

/// ASR mock: transcripts keyed by clip fingerprint. An all-zero clip
/// transcribes to an empty transcript without needing a fixture.
pub struct FixtureAsr {
    dir: PathBuf,
}

impl FixtureAsr {
    /// `root` is the fixtures root; transcripts live under `<root>/asr/`.
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FixtureAsr {
            dir: root.into().join("asr"),
        }
    }
}

impl AsrClient for FixtureAsr {
    fn transcribe(&self, audio: &AudioClip) -> Result<TimedTranscript, ClientError> {
        if audio.channels() != 1 {
            return Err(ClientError::InvalidInput(format!(
                "transcribe needs a mono clip, got {} channels",
                audio.channels()
            )));
        }
        if audio.samples().iter().all(|&s| s == 0.0) {
            return Ok(TimedTranscript::default());
        }
        let key = clip_fingerprint(audio);
        let path = self.dir.join(format!("{key}.json"));
        let text = read_fixture(&path, "asr", &key)?;
        let transcript: TimedTranscript = parse_fixture(&text, &path)?;
        if let Err(problem) = transcript.validate() {
            return Err(ClientError::Protocol {
                message: format!("fixture transcript invalid: {problem}"),
                payload_excerpt: text.chars().take(120).collect(),
            });
        }
        if transcript.last_end_s() > audio.duration_s() + ASR_END_SLACK_S {
            return Err(ClientError::Protocol {
                message: format!(
                    "transcript ends at {} s but clip lasts {} s",
                    transcript.last_end_s(),
                    audio.duration_s()
                ),
                payload_excerpt: text.chars().take(120).collect(),
            });
        }
        Ok(transcript)
    }
}

/// Separation mock that returns its input unchanged.
pub struct IdentitySeparator;

impl SeparationClient for IdentitySeparator {
    fn separate(&self, audio: &AudioClip, prompt: &str) -> Result<AudioClip, ClientError> {
        if prompt.is_empty() {
            return Err(ClientError::InvalidInput("empty separation prompt".into()));
        }
        Ok(audio.clone())
    }
}

/// One scripted separation behavior.
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum SepFixture {
    /// Return the input unchanged.
    Identity,
    /// Return the WAV at `path` (relative to the fixture file).
    Wav { path: String },
    /// Return input minus the WAV at `path`, clamped to [-1, 1].
    Subtract { path: String },
}

/// Separation mock: behaviors keyed by (clip, prompt) fingerprint.
pub struct FixtureSeparator {
    dir: PathBuf,
}

impl FixtureSeparator {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FixtureSeparator {
            dir: root.into().join("sep"),
        }
    }

    fn load_relative(&self, rel: &str) -> Result<AudioClip, ClientError> {
        wav::load_wav(self.dir.join(rel))
            .map_err(|err| ClientError::Transport(format!("loading fixture wav: {err}")))
    }
}

impl SeparationClient for FixtureSeparator {
    fn separate(&self, audio: &AudioClip, prompt: &str) -> Result<AudioClip, ClientError> {
        if prompt.is_empty() {
            return Err(ClientError::InvalidInput("empty separation prompt".into()));
        }
        let key = separation_fingerprint(audio, prompt);
        let path = self.dir.join(format!("{key}.json"));
        let text = read_fixture(&path, "sep", &key)?;
        let fixture: SepFixture = parse_fixture(&text, &path)?;
        let result = match fixture {
            SepFixture::Identity => audio.clone(),
            SepFixture::Wav { path } => self.load_relative(&path)?,
            SepFixture::Subtract { path } => {
                let speech = self.load_relative(&path)?;
                if speech.frames() != audio.frames() || speech.sample_rate() != audio.sample_rate()
                {
                    return Err(ClientError::Protocol {
                        message: "subtract fixture length/rate mismatch".into(),
                        payload_excerpt: text.chars().take(120).collect(),
                    });
                }
                let diff: Vec<f64> = audio
                    .samples()
                    .iter()
                    .zip(speech.samples())
                    .map(|(m, s)| (m - s).clamp(-1.0, 1.0))
                    .collect();
                AudioClip::new(diff, audio.sample_rate(), audio.channels())
                    .expect("clamped samples are in range")
            }
        };
        if result.frames() != audio.frames() || result.sample_rate() != audio.sample_rate() {
            return Err(ClientError::Protocol {
                message: format!(
                    "separated clip is {} frames at {} Hz but input was {} frames at {} Hz",
                    result.frames(),
                    result.sample_rate(),
                    audio.frames(),
                    audio.sample_rate()
                ),
                payload_excerpt: text.chars().take(120).collect(),
            });
        }
        Ok(result)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ChatFixture {
    response: String,
}

/// Chat mock: responses keyed by a hash of the message list.
pub struct FixtureChat {
    dir: PathBuf,
}

impl FixtureChat {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FixtureChat {
            dir: root.into().join("chat"),
        }
    }
}

impl ChatClient for FixtureChat {
    fn chat(&self, messages: &[ChatMessage], _params: &ChatParams) -> Result<String, ClientError> {
        super::validate_messages(messages)?;
        let key = chat_fingerprint(messages);
        let path = self.dir.join(format!("{key}.json"));
        let text = read_fixture(&path, "chat", &key)?;
        let fixture: ChatFixture = parse_fixture(&text, &path)?;
        if fixture.response.is_empty() {
            return Err(ClientError::Protocol {
                message: "fixture response is empty".into(),
                payload_excerpt: text.chars().take(120).collect(),
            });
        }
        Ok(fixture.response)
    }
}

/// In-memory scripted chat; handy for unit tests.
#[derive(Default)]
pub struct ScriptedChat {
    script: Vec<(Vec<ChatMessage>, String)>,
    fallback: Option<String>,
}

impl ScriptedChat {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replies to every request with `response`.
    pub fn always(response: impl Into<String>) -> Self {
        ScriptedChat {
            script: Vec::new(),
            fallback: Some(response.into()),
        }
    }

    /// Scripts an exact message list.
    pub fn with(mut self, messages: Vec<ChatMessage>, response: impl Into<String>) -> Self {
        self.script.push((messages, response.into()));
        self
    }
}

impl ChatClient for ScriptedChat {
    fn chat(&self, messages: &[ChatMessage], _params: &ChatParams) -> Result<String, ClientError> {
        super::validate_messages(messages)?;
        for (scripted, response) in &self.script {
            if scripted == messages {
                return Ok(response.clone());
            }
        }
        match &self.fallback {
            Some(response) => Ok(response.clone()),
            None => Err(ClientError::NoFixture {
                service: "chat",
                key: chat_fingerprint(messages),
            }),
        }
    }
}

/// Offline rubric judge: recognizes which scoring rubric a prompt carries
/// and emits a well-formed verdict whose numbers are a pure FNV-1a hash of
/// the prompt text. Lets benchmark runs execute with zero network.
pub struct StubJudge;

fn fnv64(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl ChatClient for StubJudge {
    fn chat(&self, messages: &[ChatMessage], _params: &ChatParams) -> Result<String, ClientError> {
        super::validate_messages(messages)?;
        let text: String = messages
            .iter()
            .filter_map(|m| match &m.content {
                Content::Text(t) => Some(t.as_str()),
                Content::Audio(_) => None,
            })
            .collect::<Vec<_>>()
            .join("\n");
        let h = fnv64(&text);
        if text.contains("Scoring Criteria (total 16 points)") {
            let score = 8.0 + (h % 17) as f64 * 0.5;
            Ok(format!("Total score: {score}/16"))
        } else if text.contains("Scoring Standard (10-point scale)") {
            let score = 4 + h % 7;
            Ok(format!("Overall score: {score}/10"))
        } else if text.contains("fact-checker") {
            let total = 4 + (h % 5) as u32;
            let correct = (h >> 8) as u32 % (total + 1);
            Ok(format!(
                "Total factual statements: {total}\nCorrect facts: {correct}\n\
                 Incorrect facts: {}\nAccuracy: {correct}/{total}",
                total - correct
            ))
        } else {
            Err(ClientError::InvalidInput(
                "prompt carries no known scoring rubric".into(),
            ))
        }
    }
}

// ---------------------------------------------------------------------------
// Fixture authoring helpers (used by tests and the fixture recorder)
// ---------------------------------------------------------------------------

fn write_keyed(dir: &Path, key: &str, body: &str) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{key}.json"));
    fs::write(&path, body)?;
    Ok(path)
}

/// Writes the ASR fixture for `clip`; returns the fixture path.
pub fn write_asr_fixture(
    root: &Path,
    clip: &AudioClip,
    transcript: &TimedTranscript,
) -> std::io::Result<PathBuf> {
    let body = serde_json::to_string_pretty(transcript).expect("transcript serializes");
    write_keyed(&root.join("asr"), &clip_fingerprint(clip), &body)
}

/// Writes a chat fixture for `messages`; returns the fixture path.
pub fn write_chat_fixture(
    root: &Path,
    messages: &[ChatMessage],
    response: &str,
) -> std::io::Result<PathBuf> {
    let body = serde_json::to_string_pretty(&ChatFixture {
        response: response.to_string(),
    })
    .expect("fixture serializes");
    write_keyed(&root.join("chat"), &chat_fingerprint(messages), &body)
}

/// Writes an identity separation fixture for `(clip, prompt)`.
pub fn write_sep_identity_fixture(
    root: &Path,
    clip: &AudioClip,
    prompt: &str,
) -> std::io::Result<PathBuf> {
    let body = serde_json::to_string_pretty(&SepFixture::Identity).expect("fixture serializes");
    write_keyed(
        &root.join("sep"),
        &separation_fingerprint(clip, prompt),
        &body,
    )
}

/// Writes a subtract separation fixture: the response will be
/// `clip - speech`, with `speech` stored beside the fixture JSON.
pub fn write_sep_subtract_fixture(
    root: &Path,
    clip: &AudioClip,
    prompt: &str,
    speech: &AudioClip,
) -> std::io::Result<PathBuf> {
    let dir = root.join("sep");
    fs::create_dir_all(&dir)?;
    let key = separation_fingerprint(clip, prompt);
    let wav_rel = format!("{key}.speech.wav");
    wav::save_wav(speech, dir.join(&wav_rel))
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::Other, e.to_string()))?;
    let body =
        serde_json::to_string_pretty(&SepFixture::Subtract { path: wav_rel }).expect("serializes");
    write_keyed(&dir, &key, &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::TranscriptSegment;

    fn tone(frames: usize, rate: u32, amp: f64, period: usize) -> AudioClip {
        let samples = (0..frames)
            .map(|i| amp * if (i / period) % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        AudioClip::new(samples, rate, 1).unwrap()
    }

    #[test]
    fn asr_mock_replays_fixture_verbatim() {
        let dir = tempfile::tempdir().unwrap();
        let clip = tone(8_000, 8_000, 0.4, 40);
        let transcript = TimedTranscript {
            segments: vec![TranscriptSegment {
                text: "what a bridge".to_string(),
                start_s: 0.2,
                end_s: 0.9,
            }],
        };
        write_asr_fixture(dir.path(), &clip, &transcript).unwrap();
        let asr = FixtureAsr::new(dir.path());
        assert_eq!(asr.transcribe(&clip).unwrap(), transcript);
    }

    #[test]
    fn asr_mock_returns_empty_transcript_for_silence() {
        let dir = tempfile::tempdir().unwrap();
        let asr = FixtureAsr::new(dir.path());
        let silence = AudioClip::silence(8_000, 8_000);
        assert!(asr.transcribe(&silence).unwrap().segments.is_empty());
    }

    #[test]
    fn asr_mock_misses_loudly() {
        let dir = tempfile::tempdir().unwrap();
        let asr = FixtureAsr::new(dir.path());
        let err = asr.transcribe(&tone(100, 8_000, 0.3, 7)).unwrap_err();
        assert!(matches!(err, ClientError::NoFixture { service: "asr", .. }));
    }

    #[test]
    fn asr_mock_rejects_fixture_longer_than_clip() {
        let dir = tempfile::tempdir().unwrap();
        let clip = tone(8_000, 8_000, 0.4, 40); // 1 s
        let transcript = TimedTranscript {
            segments: vec![TranscriptSegment {
                text: "x".to_string(),
                start_s: 0.0,
                end_s: 2.0,
            }],
        };
        write_asr_fixture(dir.path(), &clip, &transcript).unwrap();
        let err = FixtureAsr::new(dir.path()).transcribe(&clip).unwrap_err();
        assert!(matches!(err, ClientError::Protocol { .. }));
    }

    #[test]
    fn identity_separator_passes_audio_through() {
        let clip = tone(500, 8_000, 0.7, 13);
        let out = IdentitySeparator.separate(&clip, "music").unwrap();
        assert_eq!(out, clip);
        assert!(IdentitySeparator.separate(&clip, "").is_err());
    }

    #[test]
    fn subtract_fixture_recovers_music_from_mixture() {
        let dir = tempfile::tempdir().unwrap();
        let rate = 8_000;
        let music = tone(4_000, rate, 0.3, 50);
        let speech = tone(4_000, rate, 0.2, 31);
        let mixture: Vec<f64> = music
            .samples()
            .iter()
            .zip(speech.samples())
            .map(|(m, s)| m + s)
            .collect();
        let mixture = AudioClip::new(mixture, rate, 1).unwrap();
        // The stored speech is quantized to 16 bits on write, so recovery is
        // exact only to within one 16-bit step per sample.
        write_sep_subtract_fixture(dir.path(), &mixture, "music", &speech).unwrap();
        let sep = FixtureSeparator::new(dir.path());
        let out = sep.separate(&mixture, "music").unwrap();
        assert_eq!(out.frames(), mixture.frames());
        for (got, want) in out.samples().iter().zip(music.samples()) {
            assert!((got - want).abs() < 1e-4, "{got} vs {want}");
        }
    }

    #[test]
    fn wav_fixture_with_wrong_duration_is_protocol_error() {
        let dir = tempfile::tempdir().unwrap();
        let clip = tone(4_000, 8_000, 0.3, 17);
        let key = separation_fingerprint(&clip, "music");
        let sep_dir = dir.path().join("sep");
        std::fs::create_dir_all(&sep_dir).unwrap();
        wav::save_wav(&AudioClip::silence(100, 8_000), sep_dir.join("short.wav")).unwrap();
        std::fs::write(
            sep_dir.join(format!("{key}.json")),
            r#"{"kind":"wav","path":"short.wav"}"#,
        )
        .unwrap();
        let err = FixtureSeparator::new(dir.path())
            .separate(&clip, "music")
            .unwrap_err();
        assert!(matches!(err, ClientError::Protocol { .. }), "{err}");
    }

    #[test]
    fn chat_mock_replays_script_and_misses_loudly() {
        let dir = tempfile::tempdir().unwrap();
        let messages = vec![
            ChatMessage::system("be brief"),
            ChatMessage::user("rate this chorus"),
        ];
        write_chat_fixture(dir.path(), &messages, "crisp diction, slightly sharp").unwrap();
        let chat = FixtureChat::new(dir.path());
        assert_eq!(
            chat.chat(&messages, &ChatParams::default()).unwrap(),
            "crisp diction, slightly sharp"
        );
        let other = vec![ChatMessage::user("unscripted")];
        let err = chat.chat(&other, &ChatParams::default()).unwrap_err();
        assert!(matches!(err, ClientError::NoFixture { service: "chat", .. }));
    }

    #[test]
    fn fixture_replay_is_byte_identical_across_calls() {
        let dir = tempfile::tempdir().unwrap();
        let messages = vec![ChatMessage::user("again")];
        write_chat_fixture(dir.path(), &messages, "same answer").unwrap();
        let chat = FixtureChat::new(dir.path());
        let a = chat.chat(&messages, &ChatParams::default()).unwrap();
        let b = chat.chat(&messages, &ChatParams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scripted_chat_matches_exact_messages() {
        let ask = vec![ChatMessage::user("verse?")];
        let chat = ScriptedChat::new().with(ask.clone(), "Great vocals.");
        assert_eq!(chat.chat(&ask, &ChatParams::default()).unwrap(), "Great vocals.");
        let miss = vec![ChatMessage::user("bridge?")];
        assert!(chat.chat(&miss, &ChatParams::default()).is_err());
        let anychat = ScriptedChat::always("ok");
        assert_eq!(chat_fallback(&anychat), "ok");
    }

    fn chat_fallback(chat: &ScriptedChat) -> String {
        chat.chat(&[ChatMessage::user("anything")], &ChatParams::default())
            .unwrap()
    }

    #[test]
    fn stub_judge_emits_well_formed_deterministic_verdicts() {
        let judge = StubJudge;
        let params = ChatParams::default();
        let comp = vec![ChatMessage::user(
            "Scoring Criteria (total 16 points)\n## Reaction\na bold chorus",
        )];
        let a = judge.chat(&comp, &params).unwrap();
        assert_eq!(a, judge.chat(&comp, &params).unwrap());
        let score = crate::judge::parse_completeness(&a).unwrap();
        assert!((0.0..=1.0).contains(&score.normalized));

        let nov = vec![ChatMessage::user(
            "Scoring Standard (10-point scale)\n## Reaction\na bold chorus",
        )];
        crate::judge::parse_novelty(&judge.chat(&nov, &params).unwrap()).unwrap();

        let acc = vec![ChatMessage::user(
            "act as a music fact-checker\n## Reaction\na bold chorus",
        )];
        let parsed = crate::judge::parse_accuracy(&judge.chat(&acc, &params).unwrap()).unwrap();
        assert_eq!(
            parsed.counts.correct + parsed.counts.incorrect,
            parsed.counts.total
        );

        let other = vec![ChatMessage::user("no rubric at all")];
        assert!(matches!(
            judge.chat(&other, &params),
            Err(ClientError::InvalidInput(_))
        ));
    }
}
