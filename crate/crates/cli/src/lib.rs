//! Command-line pipeline around `quantlet-core`: JSON configuration, the
//! CSV and JSON file formats of every stage, atomic artifact writes and run
//! manifests.
//!
//! ```text
//! quantlet --config cohort.json [--set eval.seed=3] [--out results] <COMMAND>
//! ```
//!
//! Exit codes: 0 success, 2 configuration error, 3 schema error,
//! 4 solver convergence failure, 5 I/O error.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod formats;
pub mod stages;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::PipelineConfig;
pub use error::{CliError, CliResult};

use artifacts::{Artifacts, Seeds};
use stages::Run;

#[derive(Debug, Parser)]
#[command(
    name = "quantlet",
    version,
    about = "Quantlet features and penalized logistic classification of pixel distributions"
)]
pub struct Cli {
    /// JSON pipeline configuration; defaults apply without one.
    #[arg(short, long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Output directory, overriding `paths.out_dir`.
    #[arg(short, long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,

    /// Override one scalar config value by dotted path, e.g. `eval.seed=3`.
    #[arg(short = 's', long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,

    /// Suppress progress messages and the metrics table.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Phase volumes to EPM maps and a pixel table.
    Epm,
    /// Pixel table to quantile functions per region.
    Quantiles,
    /// Quantile functions to dictionary, quantlet basis and concordance report.
    Basis,
    /// Quantiles, bases and covariates to the feature table.
    Features,
    /// Feature table to a fitted model.
    Fit,
    /// Feature table to leave-one-out metrics and predictions.
    Evaluate,
    /// Synthetic cohort from the `synth` config section.
    Synth,
    /// Every stage in order.
    All,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Epm => "epm",
            Command::Quantiles => "quantiles",
            Command::Basis => "basis",
            Command::Features => "features",
            Command::Fit => "fit",
            Command::Evaluate => "evaluate",
            Command::Synth => "synth",
            Command::All => "all",
        }
    }
}

/// Runs one subcommand. On failure every file written by this run is
/// removed; on success `manifests/<command>.json` records what was done.
pub fn execute(cli: &Cli) -> CliResult<()> {
    let loaded = PipelineConfig::load(cli.config.as_deref(), &cli.set)?;
    let mut cfg = loaded.config;
    if let Some(out) = &cli.out {
        cfg.paths.out_dir = out.clone();
    }
    let art = Artifacts::new(&cfg.paths.out_dir)?;
    let mut run = Run::new(&cfg, art, cli.quiet);
    let outcome = match cli.command {
        Command::Epm => stages::epm(&mut run),
        Command::Quantiles => stages::quantiles(&mut run),
        Command::Basis => stages::basis(&mut run),
        Command::Features => stages::features(&mut run),
        Command::Fit => stages::fit(&mut run),
        Command::Evaluate => stages::evaluate(&mut run),
        Command::Synth => stages::synth(&mut run),
        Command::All => stages::all(&mut run),
    };
    if let Err(e) = outcome {
        run.art.discard();
        return Err(e);
    }
    let seeds =
        Seeds { dictionary: cfg.dictionary.seed, eval: cfg.eval.seed, synth: cfg.synth.as_ref().map(|s| s.seed) };
    let config: serde_json::Value = serde_json::from_str(&loaded.canonical).expect("canonical config is JSON");
    let manifest =
        run.art.manifest(cli.command.name(), artifacts::sha256_hex(loaded.canonical.as_bytes()), config, seeds);
    let path = run.art.path(&format!("manifests/{}.json", cli.command.name()));
    if let Err(e) = artifacts::write_atomic(&path, &formats::to_json(&manifest)) {
        run.art.discard();
        return Err(e);
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command.
pub fn run_from<I, T>(args: I) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::config(e.to_string()))?;
    execute(&cli)
}
