//! `optomech <task> --config <path> [--out <dir>] [--seed N] [--allow-instability]`

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod error;
mod output;
mod tasks;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use config::{RunConfig, Task};
use error::CliError;
use output::Artifacts;

#[derive(Debug, Parser)]
#[command(name = "optomech", version, about = "Circuit-model microwave optomechanics")]
struct Args {
    task: Task,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Keep going when a simulation becomes unstable.
    #[arg(long)]
    allow_instability: bool,
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(text) = std::env::var("OPTOMECH_THREADS") {
        let n: usize =
            text.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
                CliError::Config(format!("OPTOMECH_THREADS must be a positive integer, got `{text}`"))
            })?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Failed(e.to_string()))
}

fn run(args: Args) -> Result<(), CliError> {
    let config = RunConfig::load(&args.config)?;
    if let Some(task) = config.task {
        if task != args.task {
            return Err(CliError::Config(format!(
                "config is for task `{}` but `{}` was requested",
                task.name(),
                args.task.name()
            )));
        }
    }
    let dir = args
        .out
        .or_else(|| config.output.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(args.task.name()));
    let mut ctx = tasks::Context {
        seed: args.seed.unwrap_or(config.seed),
        allow_instability: args.allow_instability,
        artifacts: Artifacts::create(&dir)?,
        config,
    };
    let pool = thread_pool()?;
    pool.install(|| tasks::run(args.task, &mut ctx))?;
    for path in &ctx.artifacts.written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("optomech: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
