//! Binary checkpoint format: magic, version, dimensions, tokenizer settings,
//! text vocabulary, then every parameter as little-endian f64 in flatten
//! order.

use std::fs;
use std::path::Path;

use super::data::{TextVocab, RESERVED_IDS};
use super::{ToyConfig, ToyParams, TrainError};

const MAGIC: &[u8; 8] = b"CADENZA\0";
const VERSION: u32 = 1;

/// A trained model plus everything needed to run it on fresh audio and to
/// decode its text output.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub params: ToyParams,
    pub vocab: TextVocab,
    /// Audio-tokenizer frames per second used at training time.
    pub frame_rate: u32,
}

impl Checkpoint {
    /// Audio-tokenizer vocabulary (bins) implied by the model dimensions.
    pub fn tok_vocab(&self) -> u32 {
        (self.params.config.audio_vocab - RESERVED_IDS) as u32
    }
}

/// Serializes a checkpoint; the layout is fixed and versioned.
pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), TrainError> {
    ck.params.validate()?;
    if ck.params.config.text_vocab != ck.vocab.size() {
        return Err(TrainError::Dim(format!(
            "text vocabulary holds {} ids but the model expects {}",
            ck.vocab.size(),
            ck.params.config.text_vocab
        )));
    }
    let cfg = ck.params.config;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        cfg.d as u32,
        cfg.text_vocab as u32,
        cfg.audio_vocab as u32,
        ck.frame_rate,
        ck.vocab.chars().len() as u32,
    ] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for &c in ck.vocab.chars() {
        buf.extend_from_slice(&(c as u32).to_le_bytes());
    }
    ck.params
        .for_each_slice(|s| s.iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes())));
    fs::write(path, buf)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn bytes(&mut self, n: usize) -> Result<&'a [u8], TrainError> {
        if self.at + n > self.buf.len() {
            return Err(TrainError::Data("truncated checkpoint".into()));
        }
        let out = &self.buf[self.at..self.at + n];
        self.at += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, TrainError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, TrainError> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }
}

/// Reads back a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, TrainError> {
    let buf = fs::read(path)?;
    let mut r = Reader { buf: &buf, at: 0 };
    if r.bytes(MAGIC.len())? != MAGIC {
        return Err(TrainError::Data(
            "not a model checkpoint (bad leading magic)".into(),
        ));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(TrainError::Data(format!(
            "unsupported checkpoint version {version} (this build reads {VERSION})"
        )));
    }
    let d = r.u32()? as usize;
    let text_vocab = r.u32()? as usize;
    let audio_vocab = r.u32()? as usize;
    let frame_rate = r.u32()?;
    if d < 2 || frame_rate == 0 || audio_vocab < RESERVED_IDS + 2 {
        return Err(TrainError::Data(format!(
            "implausible checkpoint dimensions: d={d}, audio_vocab={audio_vocab}, \
             frame_rate={frame_rate}"
        )));
    }
    let n_chars = r.u32()? as usize;
    if text_vocab != RESERVED_IDS + n_chars {
        return Err(TrainError::Data(format!(
            "text vocabulary of {text_vocab} does not match {n_chars} stored characters"
        )));
    }
    let mut chars = Vec::with_capacity(n_chars);
    for _ in 0..n_chars {
        let scalar = r.u32()?;
        chars.push(char::from_u32(scalar).ok_or_else(|| {
            TrainError::Data(format!("invalid character scalar {scalar:#x} in checkpoint"))
        })?);
    }
    let vocab = TextVocab::from_chars(chars);

    let cfg = ToyConfig {
        d,
        text_vocab,
        audio_vocab,
    };
    let mut params = ToyParams::zeros(cfg);
    let mut count = 0usize;
    params.for_each_slice(|s| count += s.len());
    let mut flat = Vec::with_capacity(count);
    for _ in 0..count {
        flat.push(r.f64()?);
    }
    params.assign(&flat);
    if r.at != buf.len() {
        return Err(TrainError::Data(format!(
            "checkpoint has {} trailing bytes",
            buf.len() - r.at
        )));
    }
    Ok(Checkpoint {
        params,
        vocab,
        frame_rate,
    })
}
