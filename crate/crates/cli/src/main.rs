//! `anamorph` command-line tool.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 malformed input
//! (scene, config, image or map file, bad arguments), 3 impossible scene
//! geometry, 4 backend handshake failure, 5 backend failure mid-run.

mod backends;
mod commands;

use std::process::ExitCode;

use anamorph::Error;
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "anamorph", version, about = "Anamorphic view maps, pyramid warping and synchronized multi-view sampling")]
struct Cli {
    /// Suppress progress messages on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Trace a scene file into a UVM1 view map.
    Uvgen(commands::uvgen::Args),
    /// Forward- or inverse-warp an image through a view map.
    Warp(commands::warp::Args),
    /// Run synchronized sampling over several views.
    Sync(commands::sync::Args),
    /// Answer bridge protocol frames with an in-process stub backend.
    ServeStub(commands::serve::Args),
}

/// Human diagnostics, silenced by `--quiet`.
#[derive(Clone, Copy)]
pub struct Log {
    quiet: bool,
}

impl Log {
    pub fn say(&self, msg: impl std::fmt::Display) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Geometry(_)) => 3,
        Some(Error::Handshake(_)) => 4,
        Some(Error::Backend(_)) => 5,
        Some(Error::Io(_)) | None => 1,
        Some(_) => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let log = Log { quiet: cli.quiet };
    let result = match cli.command {
        Command::Uvgen(args) => commands::uvgen::run(args, log),
        Command::Warp(args) => commands::warp::run(args, log),
        Command::Sync(args) => commands::sync::run(args, log),
        Command::ServeStub(args) => commands::serve::run(args, log),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
