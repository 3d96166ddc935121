//! `cadenza`: command-line surface for the singing-critique pipeline —
//! segmentation, critique generation, curation, desk-scale training, and the
//! quiz/rubric benchmarks.

use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod backends;
mod cmd;
mod config;
mod paths;

use cmd::bench::BenchCommand;
use config::{CliError, Settings};

#[derive(Debug, Parser)]
#[command(
    name = "cadenza",
    version,
    about = "Singing-critique dataset, training, and benchmark pipeline"
)]
struct Cli {
    /// Plain `key = value` configuration file; flags override config.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<std::path::PathBuf>,
    /// Worker-pool size for service clients (default: logical cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    /// Root directory for fixture-backed mock clients.
    #[arg(long, global = true, value_name = "DIR")]
    fixtures: Option<std::path::PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cut a reaction recording into triplet dataset records.
    Segment(cmd::segment::SegmentArgs),
    /// Generate model-written critique records from stubs.
    Generate(cmd::generate::GenerateArgs),
    /// Filter, deduplicate, and split datasets into train/eval.
    Curate(cmd::curate::CurateArgs),
    /// Fit the desk-scale joint text/audio model.
    TrainToy(cmd::train_toy::TrainToyArgs),
    /// Verify analytic gradients against central finite differences.
    Gradcheck(cmd::gradcheck::GradcheckArgs),
    /// Run a benchmark and write a report directory.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Print the per-(source, language) manifest table.
    Stats(cmd::stats::StatsArgs),
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let settings = Settings::load(cli.config.as_deref(), cli.jobs, cli.fixtures.as_deref())?;
    match &cli.command {
        Command::Segment(args) => cmd::segment::run(args, &settings),
        Command::Generate(args) => cmd::generate::run(args, &settings),
        Command::Curate(args) => cmd::curate::run(args, &settings),
        Command::TrainToy(args) => cmd::train_toy::run(args, &settings),
        Command::Gradcheck(args) => cmd::gradcheck::run(args, &settings),
        Command::Bench(BenchCommand::Scq(args)) => cmd::bench::run_scq_cmd(args, &settings),
        Command::Bench(BenchCommand::Oeq(args)) => cmd::bench::run_oeq_cmd(args, &settings),
        Command::Stats(args) => cmd::stats::run(args, &settings),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
