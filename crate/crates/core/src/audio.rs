//! In-memory audio: clips, slicing, downmix, resampling, and the desk-scale
//! μ-law tokenizer that turns a clip into a short discrete sequence.

use thiserror::Error;

/// μ-law companding constant.
const MU: f64 = 255.0;

/// Slack (seconds) tolerated on slice bounds so values that differ from a
/// frame-exact time only by float noise still count as in range.
const EPS_S: f64 = 1e-9;

/// Errors from audio operations.
#[derive(Debug, Error)]
pub enum AudioError {
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("requested [{start_s}, {end_s}] s but clip holds {duration_s} s")]
    Bounds {
        start_s: f64,
        end_s: f64,
        duration_s: f64,
    },
    #[error("expected a mono clip, got {channels} channels")]
    NotMono { channels: u16 },
    #[error("invalid tokenizer settings: {0}")]
    TokenizerSettings(String),
    #[error("token {token} out of range for vocab_size {vocab_size}")]
    TokenRange { token: u32, vocab_size: u32 },
}

/// A PCM clip: interleaved `f64` samples in [-1, 1], 1 or 2 channels.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
    channels: u16,
}

impl AudioClip {
    /// Builds a clip, checking channel count, interleave alignment, and the
    /// [-1, 1] amplitude range.
    pub fn new(samples: Vec<f64>, sample_rate: u32, channels: u16) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidClip("sample_rate must be > 0".into()));
        }
        if !(channels == 1 || channels == 2) {
            return Err(AudioError::InvalidClip(format!(
                "channels must be 1 or 2, got {channels}"
            )));
        }
        if samples.len() % channels as usize != 0 {
            return Err(AudioError::InvalidClip(format!(
                "{} samples do not interleave into {channels} channels",
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|s| !(**s >= -1.0 && **s <= 1.0)) {
            return Err(AudioError::InvalidClip(format!(
                "sample {bad} outside [-1, 1]"
            )));
        }
        Ok(AudioClip {
            samples,
            sample_rate,
            channels,
        })
    }

    /// Convenience constructor for a silent mono clip.
    pub fn silence(frames: usize, sample_rate: u32) -> Self {
        AudioClip {
            samples: vec![0.0; frames],
            sample_rate,
            channels: 1,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channels(&self) -> u16 {
        self.channels
    }

    /// Number of frames (samples per channel).
    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels as usize
    }

    pub fn duration_s(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }
}

/// Converts a time to a frame index, rounding half away from zero.
fn frame_index(t_s: f64, sample_rate: u32) -> usize {
    (t_s * sample_rate as f64).round().max(0.0) as usize
}

/// Copies the frame range `[start_s, end_s)` into a new clip.
///
/// Bounds are checked against the clip's duration; the frame count of the
/// result is `round(end_s·rate) − round(start_s·rate)`.
pub fn slice(clip: &AudioClip, start_s: f64, end_s: f64) -> Result<AudioClip, AudioError> {
    let duration_s = clip.duration_s();
    if !(start_s >= -EPS_S && start_s < end_s && end_s <= duration_s + EPS_S) {
        return Err(AudioError::Bounds {
            start_s,
            end_s,
            duration_s,
        });
    }
    let i0 = frame_index(start_s.max(0.0), clip.sample_rate).min(clip.frames());
    let i1 = frame_index(end_s, clip.sample_rate).min(clip.frames());
    let ch = clip.channels as usize;
    Ok(AudioClip {
        samples: clip.samples[i0 * ch..i1 * ch].to_vec(),
        sample_rate: clip.sample_rate,
        channels: clip.channels,
    })
}

/// Averages channels into a mono clip; mono input is returned unchanged.
pub fn downmix_mono(clip: &AudioClip) -> AudioClip {
    if clip.channels == 1 {
        return clip.clone();
    }
    let samples = clip
        .samples
        .chunks_exact(2)
        .map(|fr| (fr[0] + fr[1]) / 2.0)
        .collect();
    AudioClip {
        samples,
        sample_rate: clip.sample_rate,
        channels: 1,
    }
}

/// Resamples a mono clip by linear interpolation of the piecewise-linear
/// reconstruction. Output duration stays within one sample period of the
/// input duration.
pub fn resample_linear(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if clip.channels != 1 {
        return Err(AudioError::NotMono {
            channels: clip.channels,
        });
    }
    if target_rate == 0 {
        return Err(AudioError::InvalidClip("target_rate must be > 0".into()));
    }
    if target_rate == clip.sample_rate {
        return Ok(clip.clone());
    }
    let n_in = clip.frames();
    if n_in == 0 {
        return Ok(AudioClip {
            samples: Vec::new(),
            sample_rate: target_rate,
            channels: 1,
        });
    }
    let ratio = target_rate as f64 / clip.sample_rate as f64;
    let n_out = ((n_in as f64) * ratio).round().max(1.0) as usize;
    let src = &clip.samples;
    let samples = (0..n_out)
        .map(|k| {
            let p = k as f64 / ratio;
            let i = (p.floor() as usize).min(n_in - 1);
            let j = (i + 1).min(n_in - 1);
            let frac = p - i as f64;
            src[i] * (1.0 - frac) + src[j] * frac
        })
        .collect();
    Ok(AudioClip {
        samples,
        sample_rate: target_rate,
        channels: 1,
    })
}

/// A discrete token sequence produced from audio.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    pub tokens: Vec<u32>,
    pub vocab_size: u32,
    /// Tokens per second of source audio.
    pub frame_rate: u32,
}

impl TokenSeq {
    /// Builds a sequence, rejecting any token outside `[0, vocab_size)`.
    pub fn new(tokens: Vec<u32>, vocab_size: u32, frame_rate: u32) -> Result<Self, AudioError> {
        if vocab_size < 2 {
            return Err(AudioError::TokenizerSettings(format!(
                "vocab_size must be >= 2, got {vocab_size}"
            )));
        }
        if frame_rate == 0 {
            return Err(AudioError::TokenizerSettings(
                "frame_rate must be > 0".into(),
            ));
        }
        if let Some(&token) = tokens.iter().find(|t| **t >= vocab_size) {
            return Err(AudioError::TokenRange { token, vocab_size });
        }
        Ok(TokenSeq {
            tokens,
            vocab_size,
            frame_rate,
        })
    }
}

/// Forward μ-law companding, [-1, 1] → [-1, 1].
fn compand(m: f64) -> f64 {
    m.signum() * (1.0 + MU * m.abs()).ln() / (1.0 + MU).ln()
}

/// Inverse μ-law companding, [-1, 1] → [-1, 1].
fn expand(y: f64) -> f64 {
    y.signum() * ((1.0 + MU).powf(y.abs()) - 1.0) / MU
}

/// Maps a companded value in [-1, 1] to a bin index.
fn quantize(y: f64, vocab_size: u32) -> u32 {
    let bin = ((y + 1.0) / 2.0 * vocab_size as f64).floor();
    (bin.max(0.0) as u32).min(vocab_size - 1)
}

/// Center of a bin, in companded space.
fn bin_center(token: u32, vocab_size: u32) -> f64 {
    (token as f64 + 0.5) / vocab_size as f64 * 2.0 - 1.0
}

/// Mean-pools each frame-rate window of a mono clip to one value.
fn pool_frames(clip: &AudioClip, frame_rate: u32) -> Vec<f64> {
    let n = clip.frames();
    let window = clip.sample_rate as f64 / frame_rate as f64;
    let n_frames = ((n as f64 * frame_rate as f64 / clip.sample_rate as f64).floor() as usize)
        .max(usize::from(n > 0));
    (0..n_frames)
        .map(|k| {
            // window >= 1 (frame_rate <= sample_rate), so a < n and a < b <= n.
            let a = ((k as f64 * window).round() as usize).min(n - 1);
            let b = (((k + 1) as f64 * window).round() as usize).clamp(a + 1, n);
            let span = &clip.samples()[a..b];
            span.iter().sum::<f64>() / span.len() as f64
        })
        .collect()
}

/// Tokenizes a mono clip: mean-pool to `frame_rate` frames, μ-law compand,
/// then uniformly quantize into `vocab_size` bins. Deterministic.
pub fn tokenize_audio(
    clip: &AudioClip,
    vocab_size: u32,
    frame_rate: u32,
) -> Result<TokenSeq, AudioError> {
    if clip.channels() != 1 {
        return Err(AudioError::NotMono {
            channels: clip.channels(),
        });
    }
    if vocab_size < 2 {
        return Err(AudioError::TokenizerSettings(format!(
            "vocab_size must be >= 2, got {vocab_size}"
        )));
    }
    if frame_rate == 0 || frame_rate > clip.sample_rate() {
        return Err(AudioError::TokenizerSettings(format!(
            "frame_rate must be in [1, sample_rate = {}], got {frame_rate}",
            clip.sample_rate()
        )));
    }
    let tokens = pool_frames(clip, frame_rate)
        .into_iter()
        .map(|m| quantize(compand(m.clamp(-1.0, 1.0)), vocab_size))
        .collect();
    Ok(TokenSeq {
        tokens,
        vocab_size,
        frame_rate,
    })
}

/// Renders a token sequence back to audio: bin centers are inverse-companded
/// and sample-held at the sequence's frame rate.
pub fn detokenize_audio(seq: &TokenSeq) -> Result<AudioClip, AudioError> {
    if let Some(&token) = seq.tokens.iter().find(|t| **t >= seq.vocab_size) {
        return Err(AudioError::TokenRange {
            token,
            vocab_size: seq.vocab_size,
        });
    }
    let samples = seq
        .tokens
        .iter()
        .map(|&t| expand(bin_center(t, seq.vocab_size)))
        .collect();
    AudioClip::new(samples, seq.frame_rate.max(1), 1)
}
