// SPDX-License-Identifier: MIT OR Apache-2.0

//! `routinecd` command-line driver.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use routinecd::evolution::EventType;
use routinecd::explanation::Verbosity;

#[derive(Debug, Parser)]
#[command(name = "routinecd", version, about = "Detect and explain changes in daily routines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analyze one or more subjects for one behavioral dimension.
    Run(RunArgs),
    /// Sensitivity sweep over beta, tau_s or tau_d.
    Sweep(SweepArgs),
    /// Generate a synthetic subject with ground truth.
    Synth(SynthArgs),
    /// Generate synthetic cohorts and a manifest for `cohort`.
    SynthCohort(SynthCohortArgs),
    /// Analyze every subject of a manifest and summarize per cohort.
    Cohort(CohortArgs),
}

#[derive(Debug, Args)]
struct LlmArgs {
    /// Skip narrative generation.
    #[arg(long, conflicts_with = "require_llm")]
    no_llm: bool,
    /// Exit with status 4 when a narrative cannot be produced.
    #[arg(long)]
    require_llm: bool,
    /// OpenAI-compatible base URL, up to the API version.
    #[arg(long, default_value = "http://localhost:11434/v1")]
    llm_url: String,
    #[arg(long, default_value = "llama3")]
    llm_model: String,
    /// Request timeout in seconds.
    #[arg(long, default_value_t = 120)]
    llm_timeout: u64,
    #[arg(long, value_enum, default_value_t = VerbosityArg::Detailed)]
    verbosity: VerbosityArg,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum VerbosityArg {
    Detailed,
    Brief,
}

impl From<VerbosityArg> for Verbosity {
    fn from(v: VerbosityArg) -> Self {
        match v {
            VerbosityArg::Detailed => Verbosity::Detailed,
            VerbosityArg::Brief => Verbosity::Brief,
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Dimension configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Daily feature table (CSV); repeat for several subjects.
    #[arg(long, required = true)]
    table: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Subject id; defaults to the table's file stem. Only valid with a single table.
    #[arg(long)]
    subject: Option<String>,
    #[command(flatten)]
    llm: LlmArgs,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Seed forwarded to the language model.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    table: PathBuf,
    /// One of beta, tau_s, tau_d.
    #[arg(long)]
    parameter: String,
    /// Inclusive range `start:stop:step`.
    #[arg(long, conflicts_with = "values", required_unless_present = "values")]
    range: Option<String>,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EventArg {
    Stable,
    Drift,
    Novel,
    Disappeared,
    Split,
    Merge,
}

impl From<EventArg> for EventType {
    fn from(e: EventArg) -> Self {
        match e {
            EventArg::Stable => EventType::Stable,
            EventArg::Drift => EventType::Drift,
            EventArg::Novel => EventType::Novel,
            EventArg::Disappeared => EventType::Disappeared,
            EventArg::Split => EventType::Split,
            EventArg::Merge => EventType::Merge,
        }
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Scenario specification (JSON).
    #[arg(long, conflicts_with_all = ["event", "random"], required_unless_present_any = ["event", "random"])]
    scenario: Option<PathBuf>,
    /// Built-in two-regime scenario scripting one event type.
    #[arg(long, value_enum, conflicts_with = "random")]
    event: Option<EventArg>,
    /// Built-in easy scenario with this many change points.
    #[arg(long)]
    random: Option<usize>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthCohortArgs {
    /// `name=subjects:multiplier`, e.g. `stable=10:1`; repeat per cohort.
    #[arg(long = "cohort", required = true)]
    cohorts: Vec<String>,
    #[arg(long, default_value_t = 360)]
    total_days: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CohortArgs {
    /// Manifest (JSON) listing subjects, cohort labels, configs and tables.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    llm: LlmArgs,
    #[arg(long, default_value_t = 0)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => commands::run(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Synth(a) => commands::synth(a),
        Command::SynthCohort(a) => commands::synth_cohort(a),
        Command::Cohort(a) => commands::cohort(a),
    };
    match outcome {
        Ok(()) => ExitCode::from(error::exit::OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
