//! PCM WAV (RIFF) read/write. Reads 16-bit integer and 32-bit float files
//! with 1–2 channels; always writes the canonical 16-bit integer format.

use std::path::Path;

use thiserror::Error;

use crate::audio::AudioClip;

/// Errors from WAV I/O.
#[derive(Debug, Error)]
pub enum WavError {
    #[error("i/o error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(
        "unsupported WAV encoding in {path}: {found}; supported: 16-bit integer \
         or 32-bit float PCM, 1-2 channels"
    )]
    Unsupported { path: String, found: String },
    #[error("malformed WAV file {path}: {message}")]
    Malformed { path: String, message: String },
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn from_hound(err: hound::Error, path: &Path) -> WavError {
    match err {
        hound::Error::IoError(source) => WavError::Io {
            path: path_str(path),
            source,
        },
        hound::Error::Unsupported => WavError::Unsupported {
            path: path_str(path),
            found: "a compressed or non-PCM encoding".to_string(),
        },
        other => WavError::Malformed {
            path: path_str(path),
            message: other.to_string(),
        },
    }
}

/// Loads a PCM WAV file, normalizing samples to [-1, 1].
pub fn load_wav<P: AsRef<Path>>(path: P) -> Result<AudioClip, WavError> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path).map_err(|e| from_hound(e, path))?;
    let spec = reader.spec();
    if spec.channels == 0 || spec.channels > 2 {
        return Err(WavError::Unsupported {
            path: path_str(path),
            found: format!("{} channels", spec.channels),
        });
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<Result<_, _>>()
            .map_err(|e| from_hound(e, path))?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(|v| f64::from(v).clamp(-1.0, 1.0)))
            .collect::<Result<_, _>>()
            .map_err(|e| from_hound(e, path))?,
        (format, bits) => {
            return Err(WavError::Unsupported {
                path: path_str(path),
                found: format!("{bits}-bit {format:?} samples"),
            });
        }
    };
    AudioClip::new(samples, spec.sample_rate, spec.channels).map_err(|e| WavError::Malformed {
        path: path_str(path),
        message: e.to_string(),
    })
}

/// Writes a clip as 16-bit integer PCM WAV. Loading the result reproduces
/// 16-bit source samples exactly.
pub fn save_wav<P: AsRef<Path>>(clip: &AudioClip, path: P) -> Result<(), WavError> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: clip.channels(),
        sample_rate: clip.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| from_hound(e, path))?;
    for &s in clip.samples() {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(|e| from_hound(e, path))?;
    }
    writer.finalize().map_err(|e| from_hound(e, path))
}
