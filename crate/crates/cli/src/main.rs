//! `imageset`: sample bounds, image-set approximation and randomized
//! filtering from the command line.
//!
//! Exit codes: 0 success, 2 configuration or parse error, 3 numerical,
//! solver or measurement-consistency failure.

mod approximate;
mod bounds;
mod filter;
mod manifest;
mod output;
mod replay;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use imageset::Model;

#[derive(Parser)]
#[command(name = "imageset", version, about = "Scenario-certified image-set approximation and randomized filtering")]
struct Cli {
    /// Worker threads for sample propagation (outputs do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Log level (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the design dimension and the sample sizes for a risk level.
    Bounds(bounds::Args),
    /// Fit a certified set to the image of X0 × W under the dynamics.
    Approximate(approximate::Args),
    /// Run the prediction-correction filter.
    Filter(filter::Args),
    /// Re-run a recorded command and compare its outputs byte for byte.
    Replay(replay::Args),
}

/// A numerical or consistency failure (exit code 3).
#[derive(Debug)]
pub struct Failure(pub String);

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Failure {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Failure>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<imageset::Error>() {
            use imageset::Error as E;
            return match e {
                E::Solver(_) | E::Degenerate(_) | E::AcceptanceRate { .. } | E::SampleDomain { .. } | E::Domain(_) => 3,
                _ => 2,
            };
        }
    }
    2
}

/// A model file path, or the name of a builtin model.
pub fn load_model(spec: &str) -> Result<(Model, Option<PathBuf>)> {
    let path = Path::new(spec);
    if path.exists() {
        let model = Model::from_file(path).with_context(|| format!("loading model {}", path.display()))?;
        return Ok((model, Some(path.to_path_buf())));
    }
    if imageset::model::BUILTINS.contains(&spec) {
        return Ok((Model::builtin(spec)?, None));
    }
    bail!(
        "model file '{spec}' not found (builtin models: {})",
        imageset::model::BUILTINS.join(", ")
    )
}

/// Comma-separated numbers.
pub fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect()
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring the worker pool")?;
    }
    match cli.command {
        Command::Bounds(a) => bounds::run(a),
        Command::Approximate(a) => approximate::run(a),
        Command::Filter(a) => filter::run(a),
        Command::Replay(a) => replay::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
