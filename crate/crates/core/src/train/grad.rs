//! Analytic gradients of the blended two-branch loss, batch averaging, and a
//! central-difference gradient checker.

use super::data::TrainBatch;
use super::forward::{encode_shared, encode_trace, head_forward, Branch, StepTrace};
use super::math::axpy;
use super::{audio_nll, init_params, text_nll, total_loss, LossReport, ToyConfig, ToyParams, TrainError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Parameter-shaped gradient accumulator; same layout as the parameters it
/// differentiates.
pub type Grads = ToyParams;

/// Backpropagates one head's summed NLL, scaled by `weight`, into `g` and
/// accumulates the hidden-state gradient into `dh`.
fn backward_head(
    params: &ToyParams,
    branch: Branch,
    steps: &[StepTrace],
    weight: f64,
    g: &mut Grads,
    dh: &mut [f64],
) {
    if weight == 0.0 {
        return;
    }
    let d = params.config.d;
    let (head, _, _) = branch.space(params);
    for step in steps {
        let mut dz = step.p.clone();
        dz[step.target] -= 1.0;
        for v in &mut dz {
            *v *= weight;
        }
        let g_head = match branch {
            Branch::Text => &mut g.text,
            Branch::Audio => &mut g.audio,
        };
        g_head.v.add_outer(&dz, &step.s, 1.0);
        let ds = head.v.matvec_t(&dz);
        let da: Vec<f64> = ds
            .iter()
            .zip(&step.s)
            .map(|(dsi, si)| dsi * (1.0 - si * si))
            .collect();
        g_head.u.add_outer(&da, &step.x, 1.0);
        axpy(&mut g_head.c, &da, 1.0);
        let dx = head.u.matvec_t(&da);
        axpy(dh, &dx[..d], 1.0);
        axpy(g.embed.row_mut(step.prev_row), &dx[d..], 1.0);
    }
}

/// Loss and exact gradient of λ·L_text + (1−λ)·L_audio for one record.
///
/// `music_ids` are audio-vocabulary ids, `persona_ids` and `text_targets`
/// text-vocabulary ids, `audio_targets` audio-vocabulary ids.
pub fn grad(
    params: &ToyParams,
    music_ids: &[usize],
    persona_ids: &[usize],
    text_targets: &[usize],
    audio_targets: &[usize],
    lambda: f64,
) -> Result<(LossReport, Grads), TrainError> {
    total_loss(0.0, 0.0, lambda)?;
    let enc = encode_trace(params, music_ids, persona_ids)?;
    let (l_text, text_steps) = head_forward(params, Branch::Text, &enc.h, text_targets)?;
    let (l_audio, audio_steps) = head_forward(params, Branch::Audio, &enc.h, audio_targets)?;

    let mut g = Grads::zeros(params.config);
    let d = params.config.d;
    let mut dh = vec![0.0; d];
    backward_head(params, Branch::Text, &text_steps, lambda, &mut g, &mut dh);
    backward_head(params, Branch::Audio, &audio_steps, 1.0 - lambda, &mut g, &mut dh);

    let dpre: Vec<f64> = dh
        .iter()
        .zip(&enc.h)
        .map(|(dhi, hi)| dhi * (1.0 - hi * hi))
        .collect();
    g.w_s.add_outer(&dpre, &enc.mean, 1.0);
    axpy(&mut g.b_s, &dpre, 1.0);
    let dm = params.w_s.matvec_t(&dpre);
    let scale = 1.0 / enc.rows.len() as f64;
    for &row in &enc.rows {
        axpy(g.embed.row_mut(row), &dm, scale);
    }

    let report = LossReport {
        l_text,
        l_audio,
        l_total: total_loss(l_text, l_audio, lambda)?,
        lambda,
    };
    Ok((report, g))
}

/// Mean loss and mean gradient over a batch of prepared records.
pub fn grad_batch(
    params: &ToyParams,
    records: &[TrainBatch],
    lambda: f64,
) -> Result<(LossReport, Grads), TrainError> {
    if records.is_empty() {
        return Err(TrainError::Empty("record"));
    }
    let mut g = Grads::zeros(params.config);
    let (mut l_text, mut l_audio) = (0.0, 0.0);
    for rec in records {
        let music = rec.music_ids();
        let (report, g_rec) = grad(
            params,
            &music,
            &rec.persona_tokens,
            &rec.text_targets,
            &rec.audio_targets,
            lambda,
        )?;
        l_text += report.l_text;
        l_audio += report.l_audio;
        g.add_scaled(&g_rec, 1.0);
    }
    let n = records.len() as f64;
    g.for_each_slice_mut(|s| {
        for v in s {
            *v /= n;
        }
    });
    l_text /= n;
    l_audio /= n;
    let report = LossReport {
        l_text,
        l_audio,
        l_total: total_loss(l_text, l_audio, lambda)?,
        lambda,
    };
    Ok((report, g))
}

fn loss_at(
    params: &ToyParams,
    music_ids: &[usize],
    persona_ids: &[usize],
    text_targets: &[usize],
    audio_targets: &[usize],
    lambda: f64,
) -> Result<f64, TrainError> {
    let h = encode_shared(params, music_ids, persona_ids)?;
    total_loss(
        text_nll(params, &h, text_targets)?,
        audio_nll(params, &h, audio_targets)?,
        lambda,
    )
}

/// Compares the analytic gradient against central differences at step `eps`
/// over every parameter; returns the worst relative error
/// |analytic − numeric| / max(|analytic|, |numeric|, 1e-8).
pub fn fd_grad_check(
    params: &ToyParams,
    music_ids: &[usize],
    persona_ids: &[usize],
    text_targets: &[usize],
    audio_targets: &[usize],
    lambda: f64,
    eps: f64,
) -> Result<f64, TrainError> {
    assert!(
        eps > 0.0 && eps <= 1e-3,
        "finite-difference step must lie in (0, 1e-3], got {eps}"
    );
    fd_worst(
        params,
        music_ids,
        persona_ids,
        text_targets,
        audio_targets,
        lambda,
        eps,
        0.0,
    )
}

/// Shared checker loop; `uncertainty` is an absolute bound on the numeric
/// estimate's own round-off error, subtracted before forming the ratio.
#[allow(clippy::too_many_arguments)]
fn fd_worst(
    params: &ToyParams,
    music_ids: &[usize],
    persona_ids: &[usize],
    text_targets: &[usize],
    audio_targets: &[usize],
    lambda: f64,
    eps: f64,
    uncertainty: f64,
) -> Result<f64, TrainError> {
    let (_, g) = grad(
        params,
        music_ids,
        persona_ids,
        text_targets,
        audio_targets,
        lambda,
    )?;
    let analytic = g.flatten();
    let base = params.flatten();
    let mut theta = base.clone();
    let mut probe = params.clone();
    let mut worst = 0.0f64;
    for i in 0..base.len() {
        theta[i] = base[i] + eps;
        probe.assign(&theta);
        let plus = loss_at(
            &probe,
            music_ids,
            persona_ids,
            text_targets,
            audio_targets,
            lambda,
        )?;
        theta[i] = base[i] - eps;
        probe.assign(&theta);
        let minus = loss_at(
            &probe,
            music_ids,
            persona_ids,
            text_targets,
            audio_targets,
            lambda,
        )?;
        theta[i] = base[i];
        let numeric = (plus - minus) / (2.0 * eps);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        let gap = ((analytic[i] - numeric).abs() - uncertainty).max(0.0);
        worst = worst.max(gap / denom);
    }
    Ok(worst)
}

/// Runs the central-difference checker over `instances` randomized
/// model/sequence configurations, cycling the blend weight through both exact
/// boundaries and interior values; returns the worst relative error seen.
///
/// A central-difference estimate of a loss of magnitude L carries irreducible
/// round-off noise of order machine-epsilon·L/eps, which swamps the ratio on
/// entries whose true gradient is tiny; the suite subtracts that bound so the
/// result reflects analytic-gradient defects rather than measurement noise.
pub fn fd_check_suite(seed: u64, instances: usize) -> Result<f64, TrainError> {
    const LAMBDAS: [f64; 5] = [0.0, 0.25, 0.5, 2.0 / 3.0, 1.0];
    const EPS: f64 = 1e-5;
    if instances == 0 {
        return Err(TrainError::Empty("checker instance"));
    }
    let mut worst = 0.0f64;
    for i in 0..instances {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let config = ToyConfig {
            d: rng.gen_range(2..=16),
            text_vocab: rng.gen_range(3..=32),
            audio_vocab: rng.gen_range(3..=64),
        };
        let params = init_params(config, rng.gen());
        let draw = |rng: &mut ChaCha8Rng, min_len: usize, vocab: usize| -> Vec<usize> {
            let len = rng.gen_range(min_len..=12);
            (0..len).map(|_| rng.gen_range(0..vocab)).collect()
        };
        let music = draw(&mut rng, 1, config.audio_vocab);
        let persona = draw(&mut rng, 0, config.text_vocab);
        let text_targets = draw(&mut rng, 1, config.text_vocab);
        let audio_targets = draw(&mut rng, 1, config.audio_vocab);
        let lambda = LAMBDAS[i % LAMBDAS.len()];
        let base = loss_at(
            &params,
            &music,
            &persona,
            &text_targets,
            &audio_targets,
            lambda,
        )?;
        let uncertainty = 16.0 * f64::EPSILON * base.abs() / EPS;
        let err = fd_worst(
            &params,
            &music,
            &persona,
            &text_targets,
            &audio_targets,
            lambda,
            EPS,
            uncertainty,
        )?;
        worst = worst.max(err);
    }
    Ok(worst)
}
