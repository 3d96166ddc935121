//! `generate`: produce model-written critique records from stub descriptions
//! of music clips.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::anyhow;
use cadenza_core::clients::ChatParams;
use cadenza_core::critique::{generate_batch, CritiqueStub};
use cadenza_core::model::{write_records, DEFAULT_GENRES};
use clap::Args;
use serde_json::json;

use crate::backends::chat_backend;
use crate::config::{runtime, CliError, Settings};
use crate::paths::{anchor, audit_path, require_file, write_audit};

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Critique stubs (JSONL), one clip description per line.
    #[arg(long)]
    pub stubs: PathBuf,
    /// Output dataset (JSONL).
    #[arg(long)]
    pub out: PathBuf,
    /// Use the fixture-backed chat client (no network, no keys).
    #[arg(long)]
    pub mock: bool,
}

pub fn run(args: &GenerateArgs, settings: &Settings) -> Result<(), CliError> {
    require_file(&args.stubs)?;
    let text = fs::read_to_string(&args.stubs).map_err(runtime)?;
    let mut stubs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let stub: CritiqueStub = serde_json::from_str(line)
            .map_err(|e| runtime(anyhow!("stubs line {}: {e}", lineno + 1)))?;
        stubs.push(stub);
    }
    // Load media relative to the stub file, but keep the original paths in
    // the output so the dataset stays machine-independent.
    let originals: BTreeMap<String, String> = stubs
        .iter()
        .map(|s| (s.id.clone(), s.music_audio_path.clone()))
        .collect();
    for stub in &mut stubs {
        stub.music_audio_path = anchor(&args.stubs, &stub.music_audio_path);
    }

    let chat = chat_backend(args.mock, settings)?;
    let (mut records, failures) =
        generate_batch(&stubs, chat.as_ref(), &ChatParams::default(), &DEFAULT_GENRES);
    for record in &mut records {
        if let Some(original) = originals.get(&record.id) {
            record.music_audio_path = original.clone();
        }
    }
    write_records(&records, &args.out).map_err(runtime)?;
    println!(
        "{} records -> {} ({} stubs failed)",
        records.len(),
        args.out.display(),
        failures.len()
    );
    if !failures.is_empty() {
        let audit = audit_path(&args.out);
        let entries: Vec<_> = failures
            .iter()
            .map(|f| json!({"stub_id": f.stub_id, "error": f.error.to_string()}))
            .collect();
        write_audit(&audit, &json!({"command": "generate", "failures": entries}))?;
        return Err(runtime(anyhow!(
            "{} of {} stubs failed; audit at {}",
            failures.len(),
            stubs.len(),
            audit.display()
        )));
    }
    Ok(())
}
