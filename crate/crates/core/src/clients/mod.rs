//! Client interfaces for the four external model services: ASR with
//! timestamps, prompt-based source separation, chat LLM, and text embeddings.
//!
//! Each service has a live HTTPS backend ([`http`]) and a deterministic
//! offline backend ([`mock`], [`offline`]). All handles are shareable across
//! threads; [`limit::Bounded`] caps in-flight calls per client.

pub mod http;
pub mod limit;
pub mod mock;
pub mod offline;

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::audio::AudioClip;
use crate::model::TimedTranscript;

/// Errors surfaced by any service client.
#[derive(Debug, Error)]
pub enum ClientError {
    /// Network-class failure (timeout, connection reset, 5xx). Retryable.
    #[error("transport error: {0}")]
    Transport(String),
    /// The service answered, but the payload violates the wire contract.
    /// Never retried.
    #[error("protocol error: {message}; payload excerpt: {payload_excerpt}")]
    Protocol {
        message: String,
        payload_excerpt: String,
    },
    /// A mock backend has no scripted response for this request.
    #[error("no {service} fixture for key {key}")]
    NoFixture { service: &'static str, key: String },
    /// The request violates a client precondition.
    #[error("invalid request: {0}")]
    InvalidInput(String),
}

impl ClientError {
    /// Whether a retry could plausibly succeed.
    pub fn retryable(&self) -> bool {
        matches!(self, ClientError::Transport(_))
    }
}

/// Connection settings for one live service.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClientConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: String,
    pub timeout_s: f64,
    pub max_retries: u32,
    pub max_in_flight: usize,
}

impl ClientConfig {
    pub fn new(endpoint: impl Into<String>, api_key_env: impl Into<String>) -> Self {
        ClientConfig {
            endpoint: endpoint.into(),
            api_key_env: api_key_env.into(),
            timeout_s: 60.0,
            max_retries: 3,
            max_in_flight: 4,
        }
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        if !(self.timeout_s > 0.0) {
            return Err(ClientError::InvalidInput(format!(
                "timeout_s must be > 0, got {}",
                self.timeout_s
            )));
        }
        if self.max_in_flight < 1 {
            return Err(ClientError::InvalidInput(
                "max_in_flight must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Message role in a chat exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

/// Message payload: plain text or an attached audio clip.
#[derive(Debug, Clone, PartialEq)]
pub enum Content {
    Text(String),
    Audio(AudioClip),
}

/// One chat message.
#[derive(Debug, Clone, PartialEq)]
pub struct ChatMessage {
    pub role: Role,
    pub content: Content,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: Content::Text(text.into()),
        }
    }

    pub fn user(text: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: Content::Text(text.into()),
        }
    }

    pub fn user_audio(clip: AudioClip) -> Self {
        ChatMessage {
            role: Role::User,
            content: Content::Audio(clip),
        }
    }
}

/// Sampling parameters for chat calls.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ChatParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for ChatParams {
    fn default() -> Self {
        ChatParams {
            temperature: 0.7,
            max_tokens: 2048,
        }
    }
}

/// Rejects empty message lists and empty contents (shared precondition of
/// every chat backend).
pub fn validate_messages(messages: &[ChatMessage]) -> Result<(), ClientError> {
    if messages.is_empty() {
        return Err(ClientError::InvalidInput("empty message list".into()));
    }
    for (i, msg) in messages.iter().enumerate() {
        let empty = match &msg.content {
            Content::Text(t) => t.is_empty(),
            Content::Audio(clip) => clip.frames() == 0,
        };
        if empty {
            return Err(ClientError::InvalidInput(format!(
                "message {i} has empty content"
            )));
        }
    }
    Ok(())
}

/// Speech-to-text with timestamps.
pub trait AsrClient: Send + Sync {
    fn transcribe(&self, audio: &AudioClip) -> Result<TimedTranscript, ClientError>;
}

/// Prompt-based source separation; output duration and rate must equal the
/// input's.
pub trait SeparationClient: Send + Sync {
    fn separate(&self, audio: &AudioClip, prompt: &str) -> Result<AudioClip, ClientError>;
}

/// Chat completion.
pub trait ChatClient: Send + Sync {
    fn chat(&self, messages: &[ChatMessage], params: &ChatParams) -> Result<String, ClientError>;

    /// Whether audio attachments reach the model (callers fall back to
    /// metadata-only prompts when false).
    fn supports_audio(&self) -> bool {
        true
    }
}

/// Text embeddings with a fixed dimension per backend.
pub trait EmbedClient: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ClientError>;

    /// Embedding dimension.
    fn dim(&self) -> usize;
}

// ---------------------------------------------------------------------------
// Retries
// ---------------------------------------------------------------------------

/// Exponential backoff settings.
#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_secs(1),
            factor: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Policy used by tests and offline paths: same attempt budget, no sleep.
    pub fn immediate(max_retries: u32) -> Self {
        RetryPolicy {
            max_retries,
            base_delay: Duration::ZERO,
            factor: 1.0,
        }
    }
}

/// Request counters shared across threads.
#[derive(Debug, Default)]
pub struct Telemetry {
    attempts: AtomicU64,
    retries: AtomicU64,
}

impl Telemetry {
    pub fn attempts(&self) -> u64 {
        self.attempts.load(Ordering::Relaxed)
    }

    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }
}

/// Runs `op` with exponential backoff. Only transport-class errors are
/// retried, at most `policy.max_retries` times; protocol errors return
/// immediately.
pub fn retry_with<T>(
    policy: &RetryPolicy,
    telemetry: &Telemetry,
    mut op: impl FnMut() -> Result<T, ClientError>,
) -> Result<T, ClientError> {
    let mut delay = policy.base_delay;
    let mut attempt = 0;
    loop {
        telemetry.attempts.fetch_add(1, Ordering::Relaxed);
        match op() {
            Ok(value) => return Ok(value),
            Err(err) if err.retryable() && attempt < policy.max_retries => {
                telemetry.retries.fetch_add(1, Ordering::Relaxed);
                std::thread::sleep(delay);
                delay = delay.mul_f64(policy.factor);
                attempt += 1;
            }
            Err(err) => return Err(err),
        }
    }
}

// ---------------------------------------------------------------------------
// Request fingerprints (mock keys and cache keys)
// ---------------------------------------------------------------------------

/// Content hash of a clip: sample rate, channel count, and raw samples.
pub fn clip_fingerprint(clip: &AudioClip) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"clip\0");
    hasher.update(clip.sample_rate().to_le_bytes());
    hasher.update(clip.channels().to_le_bytes());
    for s in clip.samples() {
        hasher.update(s.to_le_bytes());
    }
    hex::encode(hasher.finalize())
}

/// Key for a separation request: clip content plus prompt.
pub fn separation_fingerprint(clip: &AudioClip, prompt: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"sep\0");
    hasher.update(clip_fingerprint(clip).as_bytes());
    hasher.update(prompt.as_bytes());
    hex::encode(hasher.finalize())
}

/// Key for a chat request: order-sensitive hash of the message list.
pub fn chat_fingerprint(messages: &[ChatMessage]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(b"chat\0");
    for msg in messages {
        let role = match msg.role {
            Role::System => b'S',
            Role::User => b'U',
            Role::Assistant => b'A',
        };
        hasher.update([role]);
        match &msg.content {
            Content::Text(text) => {
                hasher.update(b"T");
                hasher.update((text.len() as u64).to_le_bytes());
                hasher.update(text.as_bytes());
            }
            Content::Audio(clip) => {
                hasher.update(b"W");
                hasher.update(clip_fingerprint(clip).as_bytes());
            }
        }
    }
    hex::encode(hasher.finalize())
}
