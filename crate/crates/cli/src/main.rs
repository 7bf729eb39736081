//! `gifreplay`: recording + UTG in, replayable execution trace out.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{EvalArgs, KeyframesArgs, MapArgs, RunArgs, SynthArgs, TraceArgs};
use crate::config::Common;

#[derive(Debug, Parser)]
#[command(name = "gifreplay", version, about = "Turn a visual bug recording into a replayable UTG trace")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Locate fully-rendered keyframes in a recording.
    Keyframes(KeyframesArgs),
    /// Map keyframe images to UTG nodes.
    Map(MapArgs),
    /// Pick the best acyclic launch-to-target path for a mapping.
    Trace(TraceArgs),
    /// All three phases end to end.
    Run(RunArgs),
    /// Score the pipeline on a dataset directory.
    Eval(EvalArgs),
    /// Generate synthetic dataset cases.
    Synth(SynthArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Keyframes(a) => commands::keyframes(&cli.common, a),
        Command::Map(a) => commands::map(&cli.common, a),
        Command::Trace(a) => commands::trace(&cli.common, a),
        Command::Run(a) => commands::run(&cli.common, a),
        Command::Eval(a) => commands::eval(&cli.common, a),
        Command::Synth(a) => commands::synth(&cli.common, a),
    };
    match code {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
