//! `apsi`: synthesize scenarios, analyse records and identify channels.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::SetOp;
use crate::config::CommonArgs;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "apsi", version, about = "Almost-periodic signal analysis and channel identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a random scenario and write its input/output records.
    Synth,
    /// Extract the frequency set of one record.
    Spectrum {
        /// Record CSV with `t,value` columns.
        record: PathBuf,
    },
    /// Combine two frequency-set files.
    Setop {
        #[arg(value_enum)]
        op: SetOp,
        a: PathBuf,
        b: PathBuf,
    },
    /// Identify the channel from input p to output q (both 1-based).
    Identify {
        /// Directory holding input_<l>.csv, output_<q>.csv and optionally scenario.json.
        scenario_dir: PathBuf,
        #[arg(long = "input", short = 'p', default_value_t = 1)]
        input: usize,
        #[arg(long = "output", short = 'q', default_value_t = 1)]
        output: usize,
    },
    /// Print the average power of a pulse and a cosine at growing spans.
    Paradox,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = cli.common.resolve()?;
    match cli.command {
        Command::Synth => commands::synth(&cfg),
        Command::Spectrum { record } => commands::spectrum(&record, &cfg),
        Command::Setop { op, a, b } => commands::setop(op, &a, &b, &cfg),
        Command::Identify {
            scenario_dir,
            input,
            output,
        } => commands::identify(&scenario_dir, input, output, &cfg),
        Command::Paradox => commands::paradox(),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
