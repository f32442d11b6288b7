//! Library side of the `rydgate` binary: configuration, subcommands and
//! artifact writers. `main.rs` only parses flags and maps errors to exit codes.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod svg;

use std::path::Path;
use std::time::Instant;

use clap::ValueEnum;

pub use config::RunConfig;
pub use error::CliError;
use output::{sha256_hex, OutDir, RunManifest, MANIFEST_NAME};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    OptimizePulse,
    Rb,
    Rounds,
    Sideband,
    Readout,
    Rabi,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::OptimizePulse => "optimize-pulse",
            Command::Rb => "rb",
            Command::Rounds => "rounds",
            Command::Sideband => "sideband",
            Command::Readout => "readout",
            Command::Rabi => "rabi",
        }
    }
}

/// Runs one subcommand against an already parsed config and writes the
/// manifest, also when the command itself reports non-convergence.
pub fn execute(cmd: Command, cfg: &RunConfig, config_bytes: &[u8], out_dir: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let mut out = OutDir::create(out_dir)?;
    let result = match cmd {
        Command::OptimizePulse => commands::optimize(cfg, &mut out),
        Command::Rb => commands::rb(cfg, &mut out),
        Command::Rounds => commands::rounds(cfg, &mut out),
        Command::Sideband => commands::sideband(cfg, &mut out),
        Command::Readout => commands::readout(cfg, &mut out),
        Command::Rabi => commands::rabi(cfg, &mut out),
    };
    let manifest = RunManifest {
        command: cmd.name().into(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        config_sha256: sha256_hex(config_bytes),
        seed: cfg.seed,
        files: out.files().clone(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    std::fs::write(out_dir.join(MANIFEST_NAME), text).map_err(|source| CliError::Write {
        path: out_dir.join(MANIFEST_NAME).display().to_string(),
        source,
    })?;
    result
}
