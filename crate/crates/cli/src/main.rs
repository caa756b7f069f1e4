//! `mosaicgen` command-line front end.
//!
//! Exit status is 0 on success, 2 for usage or validation problems and 3
//! for failures while running.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "mosaicgen", version, about = "Generative and classical photomosaics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Worker count shared by the commands that sample.
#[derive(Args, Debug, Clone, Copy)]
pub struct Threads {
    /// Worker threads; output does not depend on it.
    #[arg(long, env = "MOSAICGEN_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// `key = value` config file, or a manifest.json from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Reference image (PNG).
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Exemplar pool directory; subdirectory names become labels.
    #[arg(long)]
    pub pool: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `w0`.
    #[arg(long)]
    pub w0: Option<f64>,
    /// Overrides `level`.
    #[arg(long)]
    pub level: Option<u32>,
    /// Overrides `noise_mode` (literal or consistent).
    #[arg(long)]
    pub mode: Option<String>,
    #[command(flatten)]
    pub threads: Threads,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a photomosaic with guided diffusion.
    Generate(RunArgs),
    /// Match-and-adjust photomosaic from a tile pool.
    Classic(commands::classic::ClassicArgs),
    /// Fidelity metrics for a reference/mosaic pair or a directory of pairs.
    Eval(commands::eval::EvalArgs),
    /// Sweep the guidance weight over a fixed seed set.
    Ablate(commands::ablate::AblateArgs),
    /// Sample a coherent noise field and write it out for inspection.
    Noise(commands::noise::NoiseArgs),
}

/// Failure classes that map to exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl From<mosaicgen::Error> for Failure {
    fn from(e: mosaicgen::Error) -> Self {
        if e.is_validation() {
            Failure::Usage(e.into())
        } else {
            Failure::Runtime(e.into())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

pub fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow::anyhow!("{msg}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(args) => commands::generate::run(&args),
        Command::Classic(args) => commands::classic::run(&args),
        Command::Eval(args) => commands::eval::run(&args),
        Command::Ablate(args) => commands::ablate::run(&args),
        Command::Noise(args) => commands::noise::run(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let code = failure.code();
            let (Failure::Usage(e) | Failure::Runtime(e)) = failure;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
