//! Greedy decoding from a trained model: walk a head forward from the
//! begin-of-sequence id, taking the argmax token each step, until the head
//! emits end-of-sequence or the length cap is hit.

use super::data::{BOS, EOS};
use super::forward::{step_parts, Branch};
use super::{ToyParams, TrainError};

/// Which branch to decode from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Text,
    Audio,
}

/// Lowest index wins ties, keeping decoding deterministic.
fn argmax(logits: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Greedily decodes up to `max_len` head-local ids conditioned on the shared
/// hidden state `h`. The end-of-sequence id stops decoding and is not
/// included in the output.
pub fn generate(
    params: &ToyParams,
    h: &[f64],
    head: Head,
    max_len: usize,
) -> Result<Vec<usize>, TrainError> {
    if h.len() != params.config.d {
        return Err(TrainError::Dim(format!(
            "H has length {}, expected {}",
            h.len(),
            params.config.d
        )));
    }
    let branch = match head {
        Head::Text => Branch::Text,
        Head::Audio => Branch::Audio,
    };
    let mut out = Vec::new();
    let mut prev = BOS;
    for _ in 0..max_len {
        let (_, _, logits) = step_parts(params, branch, h, prev);
        let next = argmax(&logits);
        if next == EOS {
            break;
        }
        out.push(next);
        prev = next;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{encode_shared, init_params, ToyConfig, ToyParams};
    use super::*;

    /// Text vocabulary {0: begin, 1: end, 2: a, 3: b} wired by hand so the
    /// decode path is begin → a → b → end.
    fn scripted_params() -> ToyParams {
        let cfg = ToyConfig {
            d: 2,
            text_vocab: 4,
            audio_vocab: 4,
        };
        let mut p = ToyParams::zeros(cfg);
        p.embed.row_mut(0).copy_from_slice(&[2.0, 0.0]);
        p.embed.row_mut(2).copy_from_slice(&[0.0, 2.0]);
        p.embed.row_mut(3).copy_from_slice(&[-2.0, -2.0]);
        // s = tanh of the predecessor embedding: U picks out x[2..4].
        p.text.u.row_mut(0)[2] = 1.0;
        p.text.u.row_mut(1)[3] = 1.0;
        p.text.v.row_mut(1).copy_from_slice(&[-1.0, -1.0]);
        p.text.v.row_mut(2).copy_from_slice(&[1.0, 0.0]);
        p.text.v.row_mut(3).copy_from_slice(&[0.0, 1.0]);
        p
    }

    #[test]
    fn scripted_chain_decodes_and_stops_at_end() {
        let p = scripted_params();
        let out = generate(&p, &[0.0, 0.0], Head::Text, 16).unwrap();
        assert_eq!(out, vec![2, 3]);
    }

    #[test]
    fn length_cap_truncates_before_end_token() {
        let p = scripted_params();
        assert_eq!(generate(&p, &[0.0, 0.0], Head::Text, 1).unwrap(), vec![2]);
        assert_eq!(
            generate(&p, &[0.0, 0.0], Head::Text, 0).unwrap(),
            Vec::<usize>::new()
        );
    }

    #[test]
    fn audio_head_honors_its_embedding_offset() {
        // Mirror the scripted text wiring into the audio branch (embedding
        // rows shifted by text_vocab); decoding must follow the same chain.
        let mut p = scripted_params();
        p.audio = p.text.clone();
        p.text = super::super::HeadParams::zeros(2, 4);
        let rows: Vec<Vec<f64>> = (0..4).map(|r| p.embed.row(r).to_vec()).collect();
        for (r, row) in rows.iter().enumerate() {
            p.embed.row_mut(4 + r).copy_from_slice(row);
            p.embed.row_mut(r).copy_from_slice(&[0.0, 0.0]);
        }
        assert_eq!(
            generate(&p, &[0.0, 0.0], Head::Audio, 16).unwrap(),
            vec![2, 3]
        );
        // The zeroed text head now ties every logit; argmax resolves to the
        // lowest index, 0, which is never the end id, so the cap applies.
        assert_eq!(
            generate(&p, &[0.0, 0.0], Head::Text, 3).unwrap(),
            vec![0, 0, 0]
        );
    }

    #[test]
    fn decoding_is_deterministic() {
        let cfg = ToyConfig {
            d: 6,
            text_vocab: 9,
            audio_vocab: 12,
        };
        let p = init_params(cfg, 31);
        let h = encode_shared(&p, &[4, 7], &[3]).unwrap();
        let a = generate(&p, &h, Head::Audio, 24).unwrap();
        let b = generate(&p, &h, Head::Audio, 24).unwrap();
        assert_eq!(a, b);
        assert!(a.len() <= 24);
        assert!(a.iter().all(|&id| id != EOS && id < 12));
    }

    #[test]
    fn wrong_hidden_width_is_rejected() {
        let p = scripted_params();
        assert!(matches!(
            generate(&p, &[0.0; 3], Head::Text, 4),
            Err(TrainError::Dim(_))
        ));
    }
}
