//! Shared helpers for the CLI integration tests: a deterministic fixture
//! synthesizer, a subprocess runner, and golden-file comparison with an
//! opt-in update mode (`CADENZA_UPDATE_GOLDENS=1`).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cadenza_core::audio::AudioClip;
use cadenza_core::wav;

/// Sample rate of the synthesized fixture recording.
pub const FIXTURE_RATE: u32 = 4_000;
/// Length of the synthesized fixture recording in seconds.
pub const FIXTURE_LEN_S: usize = 174;

/// Path to the compiled `cadenza` binary under test.
pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_cadenza")
}

/// Directory holding checked-in fixtures (transcripts etc.).
pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// Directory holding checked-in golden outputs.
pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Deterministic noise in [-0.5, 0.5): a 64-bit LCG stepped per sample, so
/// the waveform is identical on every platform (no float transcendentals).
pub fn synth_samples(n: usize, mut state: u64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        state = state
            .wrapping_mul(6_364_136_223_846_793_005)
            .wrapping_add(1_442_695_040_888_963_407);
        let v = (state >> 48) as u16 as i32 - 32_768;
        out.push(f64::from(v) / 65_536.0);
    }
    out
}

/// Writes the 174-second mono reaction recording the pipeline tests consume.
pub fn synth_reaction_wav(path: &Path) {
    let samples = synth_samples(FIXTURE_LEN_S * FIXTURE_RATE as usize, 0x243F_6A88_85A3_08D3);
    let clip = AudioClip::new(samples, FIXTURE_RATE, 1).expect("synth samples are in range");
    wav::save_wav(&clip, path).expect("fixture wav writes");
}

/// Runs the binary with `args` in `dir`, returning the raw output.
pub fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary spawns")
}

/// Runs the binary and asserts the given exit code, echoing output on a
/// mismatch so failures are debuggable from the test log.
pub fn expect_exit(dir: &Path, args: &[&str], want: i32) -> Output {
    let out = run_in(dir, args);
    let got = out.status.code().unwrap_or(-1);
    assert_eq!(
        got,
        want,
        "exit {got}, wanted {want} for `cadenza {}`\nstdout:\n{}\nstderr:\n{}",
        args.join(" "),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    out
}

/// Compares `actual` against the checked-in golden byte-for-byte. With
/// `CADENZA_UPDATE_GOLDENS=1` the golden is (re)written instead.
pub fn assert_golden(actual: &Path, golden_name: &str) {
    let golden = golden_dir().join(golden_name);
    let produced = std::fs::read(actual)
        .unwrap_or_else(|e| panic!("reading produced file {}: {e}", actual.display()));
    if std::env::var_os("CADENZA_UPDATE_GOLDENS").is_some() {
        if let Some(parent) = golden.parent() {
            std::fs::create_dir_all(parent).expect("golden dir");
        }
        std::fs::write(&golden, &produced).expect("golden writes");
        return;
    }
    let expected = std::fs::read(&golden)
        .unwrap_or_else(|e| panic!("reading golden {}: {e}", golden.display()));
    assert_eq!(
        produced,
        expected,
        "{} differs from golden {golden_name}",
        actual.display()
    );
}

/// Drives the full offline pipeline (segment -> curate -> train -> critique
/// benchmark) inside `work`; asserts each stage exits 0. Returns the report
/// directory.
pub fn run_pipeline(work: &Path) -> PathBuf {
    let audio = work.join("reaction.wav");
    synth_reaction_wav(&audio);
    let transcript = fixtures_dir().join("transcript.json");
    std::fs::copy(&transcript, work.join("transcript.json")).expect("transcript copies");

    expect_exit(
        work,
        &[
            "segment",
            "--audio",
            "reaction.wav",
            "--transcript",
            "transcript.json",
            "--out",
            "segmented.jsonl",
            "--separate",
            "--mock",
            "--title",
            "debut stage",
            "--genre",
            "pop",
        ],
        0,
    );
    expect_exit(
        work,
        &[
            "curate",
            "--in",
            "segmented.jsonl",
            "--out-train",
            "train.jsonl",
            "--out-eval",
            "eval.jsonl",
            "--seed",
            "0",
        ],
        0,
    );
    expect_exit(
        work,
        &[
            "train-toy",
            "--data",
            "train.jsonl",
            "--out",
            "model.ckpt",
            "--steps",
            "40",
            "--frame-rate",
            "4",
            "--tok-vocab",
            "16",
            "--d",
            "8",
            "--seed",
            "0",
            "--lr",
            "0.1",
        ],
        0,
    );
    expect_exit(
        work,
        &[
            "bench",
            "oeq",
            "--eval",
            "eval.jsonl",
            "--mock",
            "--report",
            "report",
        ],
        0,
    );
    work.join("report")
}
