//! `gradcheck`: run the randomized analytic-vs-finite-difference gradient
//! suite and fail on disagreement beyond measurement noise.

use anyhow::anyhow;
use cadenza_core::train::fd_check_suite;
use clap::Args;

use crate::config::{runtime, usage, CliError, Settings};

/// Maximum acceptable relative error.
const TOLERANCE: f64 = 1e-4;

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Suite seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of randomized instances.
    #[arg(long)]
    pub instances: Option<usize>,
}

pub fn run(args: &GradcheckArgs, settings: &Settings) -> Result<(), CliError> {
    let seed = settings.u64_setting(args.seed, "seed", 0)?;
    let instances = settings.usize_setting(args.instances, "instances", 20)?;
    if instances == 0 {
        return Err(usage("--instances must be at least 1"));
    }
    let worst = fd_check_suite(seed, instances).map_err(runtime)?;
    println!("max relative error: {worst:.3e} over {instances} instances (seed {seed})");
    if worst > TOLERANCE {
        return Err(runtime(anyhow!(
            "gradient check failed: {worst:.3e} exceeds {TOLERANCE:.1e}"
        )));
    }
    Ok(())
}
