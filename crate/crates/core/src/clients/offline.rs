//! Offline text embeddings: hashed character trigrams, L2-normalized.
//!
//! Deterministic across platforms and releases (the hash is a fixed FNV-1a,
//! not the process-seeded stdlib hasher), so near-duplicate thresholds and
//! pinned regression cosines stay meaningful.

use super::{ClientError, EmbedClient};

/// Embedding dimension of the offline backend.
pub const EMBED_DIM: usize = 256;

/// Character n-gram width.
const NGRAM: usize = 3;

/// FNV-1a 64-bit over a byte slice; fixed constants keep hashes stable.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Hashed character-trigram embedder.
#[derive(Debug, Default, Clone, Copy)]
pub struct TrigramEmbedder;

impl TrigramEmbedder {
    fn embed_one(text: &str) -> Vec<f64> {
        let chars: Vec<char> = text.chars().collect();
        let mut counts = vec![0.0f64; EMBED_DIM];
        let mut gram = String::new();
        let windows = chars.len().saturating_sub(NGRAM - 1).max(1);
        for start in 0..windows {
            gram.clear();
            gram.extend(chars[start..(start + NGRAM).min(chars.len())].iter());
            counts[(fnv1a(gram.as_bytes()) % EMBED_DIM as u64) as usize] += 1.0;
        }
        let norm = counts.iter().map(|c| c * c).sum::<f64>().sqrt();
        for c in &mut counts {
            *c /= norm;
        }
        counts
    }
}

impl EmbedClient for TrigramEmbedder {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ClientError> {
        if let Some(i) = texts.iter().position(|t| t.is_empty()) {
            return Err(ClientError::InvalidInput(format!("text {i} is empty")));
        }
        Ok(texts.iter().map(|t| Self::embed_one(t)).collect())
    }

    fn dim(&self) -> usize {
        EMBED_DIM
    }
}

/// Cosine similarity of two equal-length vectors.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
