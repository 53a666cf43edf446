mod commands;
mod compare;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{GlobalArgs, RunConfig, UsageError};

/// Joint attention and joint effort analysis for pair-programming dyads.
#[derive(Debug, Parser)]
#[command(name = "dyadlens", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate synthetic dyad sessions with planted ground truth.
    Simulate(commands::SimulateArgs),
    /// Compute JVA, ME and JME series for one session.
    Analyze {
        session: PathBuf,
    },
    /// Median-cut JME/JVA episodes for one session.
    Episodes {
        session: PathBuf,
    },
    /// Directional causal models over a cohort of sessions.
    Causality {
        /// Session files or directories of `*.jsonl` sessions.
        #[arg(required = true)]
        sessions: Vec<PathBuf>,
    },
    /// Run the reactive and/or proactive feedback engine over one session.
    Feedback {
        session: PathBuf,
        /// Forecaster model JSON, required for proactive mode.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Train or evaluate the forecaster.
    #[command(subcommand)]
    Forecast(commands::ForecastCommand),
    /// ANOVA and Welch tables across two or more cohorts.
    Compare {
        /// `NAME=PATH`, where PATH is a session file or directory; repeat per cohort.
        #[arg(long = "cohort", required = true, value_name = "NAME=PATH")]
        cohorts: Vec<String>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = RunConfig::resolve(&cli.global)?;
    match cli.command {
        Command::Simulate(args) => commands::simulate(&cfg, &args),
        Command::Analyze { session } => commands::analyze(&cfg, &session),
        Command::Episodes { session } => commands::episodes(&cfg, &session),
        Command::Causality { sessions } => commands::causality(&cfg, &sessions),
        Command::Feedback { session, model } => commands::feedback(&cfg, &session, model.as_deref()),
        Command::Forecast(cmd) => commands::forecast(&cfg, &cmd),
        Command::Compare { cohorts } => compare::compare(&cfg, &cohorts),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
