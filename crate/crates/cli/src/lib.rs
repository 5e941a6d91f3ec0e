//! Command-line front end: experiment runners that write CSV/JSON/PGM
//! artifacts plus a checksummed `manifest.json`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

pub mod cmd;
pub mod error;
pub mod output;

pub use error::{CliError, CliResult};
use output::{OutputDir, RunManifest};

#[derive(Debug, Parser)]
#[command(name = "simco", version, about = "Dictionary learning experiments: SimCO, MOD and K-SVD")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON configuration; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "simco-out")]
    pub out: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, env = "SIMCO_THREADS", default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthetic comparison of the four dictionary updates.
    Synth(Common),
    /// Seed search for an ill-conditioned stall of primitive SimCO.
    Illcond(Common),
    /// Patch-based image denoising.
    Denoise {
        #[command(flatten)]
        common: Common,
        /// Noisy input image (PGM).
        #[arg(long, conflicts_with = "test_image", required_unless_present = "test_image")]
        input: Option<PathBuf>,
        /// Clean reference for PSNR (PGM).
        #[arg(long)]
        clean: Option<PathBuf>,
        /// Use the built-in SIZE x SIZE test image with synthetic noise instead of --input.
        #[arg(long, value_name = "SIZE")]
        test_image: Option<usize>,
    },
    /// Monte-Carlo check of rank-one descent convergence.
    Rankone(Common),
    /// Wall-clock comparison of the four methods.
    Bench(Common),
    /// Recompute artifact checksums against manifest.json.
    Verify {
        #[arg(long, default_value = "simco-out")]
        out: PathBuf,
    },
}

/// Result of a subcommand that produced its outputs; `exit_code` is 3 when
/// a checked property failed.
pub struct Finished {
    pub manifest: RunManifest,
    pub exit_code: i32,
}

pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub(crate) struct Run {
    pub out: OutputDir,
    manifest: RunManifest,
}

impl Run {
    pub fn start<C: Serialize>(name: &str, common: &Common, config: &C, seed: u64) -> CliResult<Self> {
        let out = OutputDir::create(&common.out)?;
        let manifest = RunManifest {
            subcommand: name.to_string(),
            config_path: common.config.as_ref().map(|p| p.display().to_string()),
            config: serde_json::to_value(config).map_err(|e| CliError::Config(e.to_string()))?,
            seed,
            out_dir: common.out.display().to_string(),
            threads: common.threads,
            artifacts: Vec::new(),
        };
        Ok(Self { out, manifest })
    }

    pub fn finish(self, exit_code: i32) -> CliResult<Finished> {
        Ok(Finished { manifest: self.out.finish(self.manifest)?, exit_code })
    }
}

fn threads_of(command: &Command) -> usize {
    match command {
        Command::Synth(c) | Command::Illcond(c) | Command::Rankone(c) | Command::Bench(c) => c.threads,
        Command::Denoise { common, .. } => common.threads,
        Command::Verify { .. } => 0,
    }
}

pub fn execute(command: &Command) -> CliResult<Finished> {
    match command {
        Command::Synth(c) => cmd::synth::run(c),
        Command::Illcond(c) => cmd::illcond::run(c),
        Command::Denoise { common, input, clean, test_image } => {
            cmd::denoise::run(common, input.as_deref(), clean.as_deref(), *test_image)
        }
        Command::Rankone(c) => cmd::rankone::run(c),
        Command::Bench(c) => cmd::bench::run(c),
        Command::Verify { out } => cmd::verify::run(out),
    }
}

/// Runs the parsed command on the requested pool and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let threads = threads_of(&cli.command);
    match simco::par::with_threads(threads, || execute(&cli.command)) {
        Ok(done) => done.exit_code,
        Err(e) => {
            eprintln!("simco: {e}");
            e.exit_code()
        }
    }
}
