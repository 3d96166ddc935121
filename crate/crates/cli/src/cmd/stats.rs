//! `stats`: print the per-(source, language) manifest table for a dataset.

use std::path::PathBuf;

use cadenza_core::curate::{manifest_stats, render_stats};
use cadenza_core::model::read_records;
use clap::Args;

use crate::config::{runtime, CliError, Settings};
use crate::paths::require_file;

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Dataset (JSONL).
    #[arg(long = "in")]
    pub input: PathBuf,
}

pub fn run(args: &StatsArgs, _settings: &Settings) -> Result<(), CliError> {
    require_file(&args.input)?;
    let records = read_records(&args.input).map_err(runtime)?;
    print!("{}", render_stats(&manifest_stats(&records)));
    Ok(())
}
