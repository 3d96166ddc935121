//! Path helpers shared by the subcommands: existence checks, media-path
//! anchoring, and audit-file placement.

use std::path::{Path, PathBuf};

use crate::config::{runtime, usage, CliError};

/// Usage error (exit 2) when a required input file is absent.
pub fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("missing input file: {}", path.display())))
    }
}

/// Resolves a record's possibly-relative media path against the directory of
/// the dataset file that referenced it; absolute paths pass through.
pub fn anchor(referencing_file: &Path, media_path: &str) -> String {
    let p = Path::new(media_path);
    if p.is_absolute() {
        return media_path.to_string();
    }
    match referencing_file.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => {
            parent.join(p).to_string_lossy().into_owned()
        }
        _ => media_path.to_string(),
    }
}

/// Audit file placed beside an output: `out.jsonl` → `out.jsonl.audit.json`.
pub fn audit_path(out: &Path) -> PathBuf {
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    out.with_file_name(format!("{name}.audit.json"))
}

/// Writes a pretty-printed audit payload.
pub fn write_audit(path: &Path, payload: &serde_json::Value) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(payload).map_err(runtime)?;
    std::fs::write(path, body + "\n").map_err(runtime)
}
