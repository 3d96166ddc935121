//! Live service backends speaking a chat-completion-style JSON wire API over
//! HTTP(S) with bearer-token auth. Audio crosses the wire as base64 WAV.

use std::io::Cursor;
use std::sync::Arc;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde_json::{json, Value};

use super::{
    retry_with, AsrClient, ChatClient, ChatMessage, ChatParams, ClientConfig, ClientError,
    Content, EmbedClient, RetryPolicy, Role, SeparationClient, Telemetry,
};
use crate::audio::AudioClip;
use crate::model::{TimedTranscript, TranscriptSegment};

/// Tolerance on a transcript's final timestamp vs. clip duration.
const ASR_END_SLACK_S: f64 = 0.1;

fn excerpt(text: &str) -> String {
    text.chars().take(200).collect()
}

fn protocol(message: impl Into<String>, payload: &str) -> ClientError {
    ClientError::Protocol {
        message: message.into(),
        payload_excerpt: excerpt(payload),
    }
}

/// Encodes a clip as 16-bit WAV bytes, base64.
fn clip_to_base64(clip: &AudioClip) -> String {
    let spec = hound::WavSpec {
        channels: clip.channels(),
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::new());
    {
        let mut writer = hound::WavWriter::new(&mut cursor, spec).expect("in-memory wav");
        for &s in clip.samples() {
            let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            writer.write_sample(v).expect("in-memory wav");
        }
        writer.finalize().expect("in-memory wav");
    }
    BASE64.encode(cursor.into_inner())
}

/// Decodes base64 WAV bytes into a clip.
fn clip_from_base64(data: &str) -> Result<AudioClip, ClientError> {
    let bytes = BASE64
        .decode(data)
        .map_err(|e| protocol(format!("audio field is not base64: {e}"), data))?;
    let mut reader = hound::WavReader::new(Cursor::new(bytes))
        .map_err(|e| protocol(format!("audio field is not WAV: {e}"), ""))?;
    let spec = reader.spec();
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(|e| protocol(format!("truncated WAV payload: {e}"), ""))?,
        (fmt, bits) => {
            return Err(protocol(
                format!("service returned {bits}-bit {fmt:?} WAV; expected 16-bit integer"),
                "",
            ))
        }
    };
    AudioClip::new(samples, spec.sample_rate, spec.channels)
        .map_err(|e| protocol(format!("returned audio invalid: {e}"), ""))
}

/// Shared transport: agent, auth, retries, telemetry.
struct Transport {
    config: ClientConfig,
    agent: ureq::Agent,
    policy: RetryPolicy,
    telemetry: Arc<Telemetry>,
}

impl Transport {
    fn new(config: ClientConfig, policy: RetryPolicy) -> Result<Self, ClientError> {
        config.validate()?;
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs_f64(config.timeout_s))
            .build();
        Ok(Transport {
            config,
            agent,
            policy,
            telemetry: Arc::new(Telemetry::default()),
        })
    }

    fn api_key(&self) -> Result<String, ClientError> {
        std::env::var(&self.config.api_key_env).map_err(|_| {
            ClientError::InvalidInput(format!(
                "environment variable {} is not set",
                self.config.api_key_env
            ))
        })
    }

    /// POSTs `body`, retrying transport-class failures with backoff.
    fn post_json(&self, body: &Value) -> Result<Value, ClientError> {
        let key = self.api_key()?;
        retry_with(&self.policy, &self.telemetry, || {
            let response = self
                .agent
                .post(&self.config.endpoint)
                .set("Authorization", &format!("Bearer {key}"))
                .send_json(body.clone());
            let response = match response {
                Ok(r) => r,
                // 429 and 5xx are transient service conditions; other
                // statuses mean the request itself is wrong.
                Err(ureq::Error::Status(code, r)) if code == 429 || code >= 500 => {
                    return Err(ClientError::Transport(format!(
                        "HTTP {code}: {}",
                        excerpt(&r.into_string().unwrap_or_default())
                    )));
                }
                Err(ureq::Error::Status(code, r)) => {
                    return Err(protocol(
                        format!("HTTP {code}"),
                        &r.into_string().unwrap_or_default(),
                    ));
                }
                Err(ureq::Error::Transport(t)) => {
                    return Err(ClientError::Transport(t.to_string()));
                }
            };
            let text = response
                .into_string()
                .map_err(|e| ClientError::Transport(format!("reading response body: {e}")))?;
            serde_json::from_str(&text)
                .map_err(|e| protocol(format!("response is not JSON: {e}"), &text))
        })
    }
}

// ---------------------------------------------------------------------------
// ASR
// ---------------------------------------------------------------------------

/// Live speech-to-text client.
pub struct HttpAsr {
    transport: Transport,
}

impl HttpAsr {
    pub fn new(config: ClientConfig) -> Result<Self, ClientError> {
        let policy = RetryPolicy {
            max_retries: config.max_retries,
            ..RetryPolicy::default()
        };
        Self::with_policy(config, policy)
    }

    pub fn with_policy(config: ClientConfig, policy: RetryPolicy) -> Result<Self, ClientError> {
        Ok(HttpAsr {
            transport: Transport::new(config, policy)?,
        })
    }

    pub fn telemetry(&self) -> Arc<Telemetry> {
        Arc::clone(&self.transport.telemetry)
    }
}

impl AsrClient for HttpAsr {
    fn transcribe(&self, audio: &AudioClip) -> Result<TimedTranscript, ClientError> {
        if audio.channels() != 1 {
            return Err(ClientError::InvalidInput(format!(
                "transcribe needs a mono clip, got {} channels",
                audio.channels()
            )));
        }
        let body = json!({
            "task": "transcribe",
            "audio": {"format": "wav", "data": clip_to_base64(audio)},
        });
        let value = self.transport.post_json(&body)?;
        let raw = value.to_string();
        let segments = value
            .get("segments")
            .and_then(Value::as_array)
            .ok_or_else(|| protocol("response lacks 'segments' array", &raw))?;
        let segments = segments
            .iter()
            .map(|s| {
                serde_json::from_value::<TranscriptSegment>(s.clone())
                    .map_err(|e| protocol(format!("bad segment: {e}"), &raw))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let transcript = TimedTranscript { segments };
        if let Err(problem) = transcript.validate() {
            return Err(protocol(format!("invalid transcript: {problem}"), &raw));
        }
        if transcript.last_end_s() > audio.duration_s() + ASR_END_SLACK_S {
            return Err(protocol(
                format!(
                    "transcript ends at {} s but clip lasts {} s",
                    transcript.last_end_s(),
                    audio.duration_s()
                ),
                &raw,
            ));
        }
        Ok(transcript)
    }
}

// ---------------------------------------------------------------------------
// Separation
// ---------------------------------------------------------------------------

/// Live prompt-based source separation client.
pub struct HttpSeparator {
    transport: Transport,
}

impl HttpSeparator {
    pub fn new(config: ClientConfig) -> Result<Self, ClientError> {
        let policy = RetryPolicy {
            max_retries: config.max_retries,
            ..RetryPolicy::default()
        };
        Self::with_policy(config, policy)
    }

    pub fn with_policy(config: ClientConfig, policy: RetryPolicy) -> Result<Self, ClientError> {
        Ok(HttpSeparator {
            transport: Transport::new(config, policy)?,
        })
    }

    pub fn telemetry(&self) -> Arc<Telemetry> {
        Arc::clone(&self.transport.telemetry)
    }
}

impl SeparationClient for HttpSeparator {
    fn separate(&self, audio: &AudioClip, prompt: &str) -> Result<AudioClip, ClientError> {
        if prompt.is_empty() {
            return Err(ClientError::InvalidInput("empty separation prompt".into()));
        }
        if audio.channels() != 1 {
            return Err(ClientError::InvalidInput(format!(
                "separate needs a mono clip, got {} channels",
                audio.channels()
            )));
        }
        let body = json!({
            "task": "separate",
            "prompt": prompt,
            "audio": {"format": "wav", "data": clip_to_base64(audio)},
        });
        let value = self.transport.post_json(&body)?;
        let raw = value.to_string();
        let data = value
            .pointer("/audio/data")
            .and_then(Value::as_str)
            .ok_or_else(|| protocol("response lacks 'audio.data'", &raw))?;
        let clip = clip_from_base64(data)?;
        if clip.frames() != audio.frames() || clip.sample_rate() != audio.sample_rate() {
            return Err(protocol(
                format!(
                    "separated clip is {} frames at {} Hz but input was {} frames at {} Hz",
                    clip.frames(),
                    clip.sample_rate(),
                    audio.frames(),
                    audio.sample_rate()
                ),
                &raw,
            ));
        }
        Ok(clip)
    }
}

// ---------------------------------------------------------------------------
// Chat
// ---------------------------------------------------------------------------

/// Live chat-completion client.
pub struct HttpChat {
    transport: Transport,
}

impl HttpChat {
    pub fn new(config: ClientConfig) -> Result<Self, ClientError> {
        let policy = RetryPolicy {
            max_retries: config.max_retries,
            ..RetryPolicy::default()
        };
        Self::with_policy(config, policy)
    }

    pub fn with_policy(config: ClientConfig, policy: RetryPolicy) -> Result<Self, ClientError> {
        Ok(HttpChat {
            transport: Transport::new(config, policy)?,
        })
    }

    pub fn telemetry(&self) -> Arc<Telemetry> {
        Arc::clone(&self.transport.telemetry)
    }
}

fn message_to_json(msg: &ChatMessage) -> Value {
    let role = match msg.role {
        Role::System => "system",
        Role::User => "user",
        Role::Assistant => "assistant",
    };
    let content = match &msg.content {
        Content::Text(text) => json!([{"type": "text", "text": text}]),
        Content::Audio(clip) => json!([{
            "type": "audio",
            "audio": {"format": "wav", "data": clip_to_base64(clip)},
        }]),
    };
    json!({"role": role, "content": content})
}

impl ChatClient for HttpChat {
    fn chat(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<String, ClientError> {
        super::validate_messages(messages)?;
        let body = json!({
            "messages": messages.iter().map(message_to_json).collect::<Vec<_>>(),
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        let value = self.transport.post_json(&body)?;
        let raw = value.to_string();
        let text = value
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .ok_or_else(|| protocol("response lacks 'choices[0].message.content'", &raw))?;
        if text.is_empty() {
            return Err(protocol("assistant reply is empty", &raw));
        }
        Ok(text.to_string())
    }
}

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

/// Live embedding client; `dim` declares the expected vector dimension.
pub struct HttpEmbed {
    transport: Transport,
    dim: usize,
}

impl HttpEmbed {
    pub fn new(config: ClientConfig, dim: usize) -> Result<Self, ClientError> {
        let policy = RetryPolicy {
            max_retries: config.max_retries,
            ..RetryPolicy::default()
        };
        Self::with_policy(config, dim, policy)
    }

    pub fn with_policy(
        config: ClientConfig,
        dim: usize,
        policy: RetryPolicy,
    ) -> Result<Self, ClientError> {
        Ok(HttpEmbed {
            transport: Transport::new(config, policy)?,
            dim,
        })
    }

    pub fn telemetry(&self) -> Arc<Telemetry> {
        Arc::clone(&self.transport.telemetry)
    }
}

impl EmbedClient for HttpEmbed {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ClientError> {
        if let Some(i) = texts.iter().position(|t| t.is_empty()) {
            return Err(ClientError::InvalidInput(format!("text {i} is empty")));
        }
        let body = json!({"input": texts});
        let value = self.transport.post_json(&body)?;
        let raw = value.to_string();
        let data = value
            .get("data")
            .and_then(Value::as_array)
            .ok_or_else(|| protocol("response lacks 'data' array", &raw))?;
        if data.len() != texts.len() {
            return Err(protocol(
                format!("asked for {} embeddings, got {}", texts.len(), data.len()),
                &raw,
            ));
        }
        data.iter()
            .map(|item| {
                let vector: Vec<f64> = item
                    .get("embedding")
                    .and_then(Value::as_array)
                    .ok_or_else(|| protocol("item lacks 'embedding'", &raw))?
                    .iter()
                    .map(|v| v.as_f64().ok_or_else(|| protocol("non-numeric embedding", &raw)))
                    .collect::<Result<_, _>>()?;
                if vector.len() != self.dim {
                    return Err(protocol(
                        format!("embedding has dimension {}, expected {}", vector.len(), self.dim),
                        &raw,
                    ));
                }
                Ok(vector)
            })
            .collect()
    }

    fn dim(&self) -> usize {
        self.dim
    }
}
