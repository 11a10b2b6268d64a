use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use commands::{AnnotateArgs, AssessArgs, DistillArgs, PredictArgs, SynthArgs, TheoryCommand};

#[derive(Debug, Parser)]
#[command(name = "cdistill", version, about = "Distill candidate-set annotations into a single-label classifier")]
struct Cli {
    /// Flat TOML file; keys use the same names as the flags, in snake_case.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for relative output paths.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a Gaussian-cluster dataset with noisy candidate sets.
    Synth(SynthArgs),
    /// Query a chat model (or a replay log) for candidate annotations.
    Annotate(AnnotateArgs),
    /// Score candidate sets or predictions against gold labels.
    Assess(AssessArgs),
    /// Train a classifier from candidate sets.
    Distill(DistillArgs),
    /// Label a dataset with a trained model.
    Predict(PredictArgs),
    /// Noise-tolerance conditions and sweeps for the linearized model.
    #[command(subcommand)]
    Theory(TheoryCommand),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let ctx = match commands::Context::new(cli.config.as_deref(), cli.seed, cli.out_dir) {
        Ok(ctx) => ctx,
        Err(e) => return report(&e),
    };
    let result = match cli.command {
        Command::Synth(args) => commands::synth::run(&ctx, args),
        Command::Annotate(args) => commands::annotate::run(&ctx, args),
        Command::Assess(args) => commands::assess::run(&ctx, args),
        Command::Distill(args) => commands::distill::run(&ctx, args),
        Command::Predict(args) => commands::predict::run(&ctx, args),
        Command::Theory(cmd) => commands::theory::run(&ctx, cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}

fn report(e: &anyhow::Error) -> ExitCode {
    eprintln!("error: {e:#}");
    ExitCode::from(commands::exit_code(e))
}
