use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use rydgate_cli::config::DEFAULT_CONFIG;
use rydgate_cli::{execute, CliError, Command, RunConfig};

/// Rydberg CZ gate simulator: pulse optimization, benchmarking, cooling and readout.
#[derive(Parser, Debug)]
#[command(name = "rydgate", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration; the shipped default when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Replace the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; all available cores when omitted.
    #[arg(long)]
    workers: Option<usize>,
}

fn run(args: &Args) -> Result<(), CliError> {
    let (mut cfg, bytes) = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => (RunConfig::parse(DEFAULT_CONFIG)?, DEFAULT_CONFIG.as_bytes().to_vec()),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {n} workers: {e}")))?;
    }
    execute(args.command, &cfg, &bytes, &args.out)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rydgate {}: {e}", args.command.name());
            ExitCode::from(e.exit_code())
        }
    }
}
