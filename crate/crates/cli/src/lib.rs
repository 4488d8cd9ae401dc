//! Command-line front end for the `hamflow` pipeline.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 numeric failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use hamflow::Split;

pub mod commands;
pub mod config;
pub mod detect;

pub use commands::{BankFile, FeatureMode, LoadedModel, ModelFile};
pub use config::{RunConfig, Stamp, TOOL_VERSION};
pub use detect::Detection;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] hamflow::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(hamflow::Error::Numeric(_)) => 3,
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "hamflow", version, about = "Hamiltonian streamline features and boosted detection")]
pub struct Cli {
    /// TOML file of run settings
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed for every random choice
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Average the face images of a manifest split into a canonical image
    Canon(CanonArgs),
    /// Trace Hamiltonian orbits of a canonical image
    Orbits(OrbitsArgs),
    /// Train a boosted classifier
    Train(TrainArgs),
    /// Evaluate a model on a manifest split
    Eval(EvalArgs),
    /// Scan an image with a sliding window
    Detect(DetectArgs),
    /// Poincare and Conley indexes of closed orbits on an image
    Indices(IndicesArgs),
    /// Cut random negative patches from clutter images
    Patches(PatchesArgs),
}

fn parse_split(s: &str) -> Result<Split, String> {
    s.parse()
}

#[derive(Debug, Clone, Args)]
pub struct CanonArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Binary field cache to write
    #[arg(long)]
    pub out: PathBuf,
    /// PNG preview path (default: OUT with a .png extension)
    #[arg(long)]
    pub preview: Option<PathBuf>,
    #[arg(long, default_value = "train", value_parser = parse_split)]
    pub split: Split,
}

#[derive(Debug, Clone, Args)]
pub struct OrbitsArgs {
    /// Canonical image (field cache, PGM or PNG)
    #[arg(long)]
    pub canonical: PathBuf,
    /// Writes PREFIX.json, PREFIX.svg and PREFIX_indices.csv
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value = "hamiltonian")]
    pub features: FeatureMode,
    /// Boosting rounds (overrides the config)
    #[arg(long)]
    pub rounds: Option<usize>,
    /// Canonical image; default is the mean of the training faces
    #[arg(long)]
    pub canonical: Option<PathBuf>,
    /// Model JSON; the bank and report are written beside it
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "test", value_parser = parse_split)]
    pub split: Split,
    /// Writes PREFIX_roc.csv and PREFIX_confusion.csv
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub image: PathBuf,
    /// Writes PREFIX.csv and PREFIX.svg
    #[arg(long)]
    pub out_prefix: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct IndicesArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Orbit JSON as written by `orbits`
    #[arg(long)]
    pub orbits: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PatchesArgs {
    #[arg(long, required = true, num_args = 1..)]
    pub sources: Vec<PathBuf>,
    #[arg(long)]
    pub width: usize,
    #[arg(long)]
    pub height: usize,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Directory for patch PGMs and a patches.csv manifest fragment
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "train", value_parser = parse_split)]
    pub split: Split,
}

/// Parses `args` (including the program name) and runs the command, returning the exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Resolves the effective configuration for a parsed command line.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Command::Train(TrainArgs { rounds: Some(r), .. }) = &cli.command {
        cfg.rounds = *r;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Canon(a) => commands::cmd_canon(&cfg, a),
        Command::Orbits(a) => commands::cmd_orbits(&cfg, a),
        Command::Train(a) => commands::cmd_train(&cfg, a).map(|_| ()),
        Command::Eval(a) => commands::cmd_eval(&cfg, a).map(|_| ()),
        Command::Detect(a) => detect::cmd_detect(&cfg, a).map(|_| ()),
        Command::Indices(a) => commands::cmd_indices(&cfg, a),
        Command::Patches(a) => commands::cmd_patches(&cfg, a),
    })
}
