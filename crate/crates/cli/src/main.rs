mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "abcrf", version, about = "Two-stage ABC rejection with random-forest screening")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the master seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (0 = all cores); overrides the config.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one parameter set and write the model output.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Parameter values as name=value, in any order.
        #[arg(long, value_delimiter = ',', required = true)]
        params: Vec<String>,
    },
    /// Stage 1: simulate prior draws and label them.
    Stage1 {
        #[command(flatten)]
        common: Common,
    },
    /// Train the screening forest on the stage-1 particles.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Stage 2: screen candidates with the forest and simulate the survivors.
    Stage2 {
        #[command(flatten)]
        common: Common,
    },
    /// Plain ABC rejection for comparison.
    Baseline {
        #[command(flatten)]
        common: Common,
    },
    /// Marginal summaries and histogram tables for the posterior.
    Report {
        #[command(flatten)]
        common: Common,
    },
    /// Fit the logistic prevalence curve to a `t,prevalence` CSV.
    FitLogistic {
        /// Prevalence samples.
        #[arg(long)]
        input: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { common, params } => commands::simulate(&common, &params),
        Command::Stage1 { common } => commands::stage1(&common),
        Command::Train { common } => commands::train(&common),
        Command::Stage2 { common } => commands::stage2(&common),
        Command::Baseline { common } => commands::baseline(&common),
        Command::Report { common } => commands::report(&common),
        Command::FitLogistic { input } => commands::fit(&input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
