//! The `dazzle` command line: argument parsing, run metadata, exit codes.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use thiserror::Error;

pub use config::{
    LocEvalSection, Paths, ProtocolSection, ReportSection, RunConfig, SampleSource, SamplesSection, SynthSection,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, unreadable or invalid configuration, missing inputs.
    #[error("{0}")]
    Usage(String),
    /// Anything that went wrong while computing.
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Failure(_) => EXIT_FAILURE,
        }
    }

    pub(crate) fn failure(e: impl std::fmt::Display) -> Self {
        CliError::Failure(e.to_string())
    }

    pub(crate) fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "dazzle", version, about = "Crowd-robust cattle re-identification toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML run file; every section is optional.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Global seed (overrides the config file).
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory (overrides the config file).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic herd corpus (frames, manifest, annotations).
    Synth(Common),
    /// Size-filter and NMS raw detections.
    Refine(Common),
    /// Cut RGB-mask samples from annotations or detections.
    BuildMasks(Common),
    /// Localisation metrics of detections against ground truth.
    Loceval(Common),
    /// Train the contrastive encoder on all samples.
    Train(Common),
    /// Score a trained encoder: leave-one-out kNN and clustering.
    Reideval(Common),
    /// Cross-validated training and evaluation.
    Crossval(Common),
    /// Summarise earlier run directories.
    Report(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Synth(c) => ("synth", c),
            Command::Refine(c) => ("refine", c),
            Command::BuildMasks(c) => ("build-masks", c),
            Command::Loceval(c) => ("loceval", c),
            Command::Train(c) => ("train", c),
            Command::Reideval(c) => ("reideval", c),
            Command::Crossval(c) => ("crossval", c),
            Command::Report(c) => ("report", c),
        }
    }
}

/// Everything a command needs: the resolved config and its output directory.
pub struct Run {
    pub command: &'static str,
    pub config: RunConfig,
    pub out: PathBuf,
}

impl Run {
    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

#[derive(Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    config_hash: String,
    seed: u64,
    versions: Versions,
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct Versions {
    dazzle_reid: &'static str,
    dataset_schema: u32,
    checkpoint_format: u32,
}

fn write_run_meta(run: &Run) -> Result<(), CliError> {
    let meta = RunMeta {
        command: run.command,
        config_hash: run.config.hash(),
        seed: run.config.seed,
        versions: Versions {
            dazzle_reid: env!("CARGO_PKG_VERSION"),
            dataset_schema: crate::ingest::SCHEMA_VERSION,
            checkpoint_format: crate::embedder::CHECKPOINT_VERSION,
        },
        config: &run.config,
    };
    let text = serde_json::to_string_pretty(&meta).map_err(CliError::failure)?;
    write_file(&run.path("run_meta.json"), format!("{text}\n").as_bytes())
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Failure(format!("{}: {e}", path.display())))
}

fn resolve(command: &'static str, common: &Common) -> Result<Run, CliError> {
    let mut config = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out = Some(out.clone());
    }
    let out = config.out.clone().ok_or_else(|| CliError::Usage("no output directory: pass --out DIR or set `out`".into()))?;
    Ok(Run { command, config, out })
}

/// Runs one invocation and returns its process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    let (name, common) = command.parts();
    let run = resolve(name, common)?;
    // check inputs before touching the output directory
    commands::preflight(command, &run)?;
    std::fs::create_dir_all(&run.out).map_err(|e| CliError::Failure(format!("{}: {e}", run.out.display())))?;
    match command {
        Command::Synth(_) => commands::synth(&run)?,
        Command::Refine(_) => commands::refine(&run)?,
        Command::BuildMasks(_) => commands::build_masks(&run)?,
        Command::Loceval(_) => commands::loceval(&run)?,
        Command::Train(_) => commands::train(&run)?,
        Command::Reideval(_) => commands::reideval(&run)?,
        Command::Crossval(_) => commands::crossval(&run)?,
        Command::Report(_) => commands::report(&run)?,
    }
    write_run_meta(&run)
}
