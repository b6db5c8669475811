//! The `cavkin` command line: configuration, run modes and table output.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;

use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

pub use config::{ExperimentConfig, Mode};
pub use error::CliError;
pub use experiment::{run, Report};

#[derive(Debug, Parser)]
#[command(name = "cavkin", version, about = "Cavity cooling and self-organisation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ensemble of stochastic trajectories at one parameter set.
    Simulate(RunArgs),
    /// Ensembles over a list of pump strengths, with branch statistics.
    Sweep(RunArgs),
    /// Analytic predictions, optionally with the Gaussian closure.
    Kinetic(RunArgs),
    /// Fokker–Planck evolution of the velocity distribution.
    Fpe(RunArgs),
    /// Ensembles at several particle numbers on a common `t/N` axis.
    Collapse(RunArgs),
}

impl Command {
    fn parts(&self) -> (Mode, &RunArgs) {
        match self {
            Command::Simulate(a) => (Mode::Simulate, a),
            Command::Sweep(a) => (Mode::Sweep, a),
            Command::Kinetic(a) => (Mode::Kinetic, a),
            Command::Fpe(a) => (Mode::Fpe, a),
            Command::Collapse(a) => (Mode::Collapse, a),
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment file (TOML).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Master seed, overriding the file.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; defaults to `output_dir` from the file, then `cavkin-<mode>`.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads. Results do not depend on it.
    #[arg(long, value_name = "INT")]
    pub workers: Option<usize>,
    /// Override a value, e.g. `--set model.kappa=50`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

/// Parses `args`, runs the experiment and returns the process exit code.
/// Errors go to `stderr` as one line.
pub fn main_with_args<I, T>(args: I, stderr: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let message = e.to_string();
            let first = message
                .lines()
                .next()
                .unwrap_or_default()
                .trim_start_matches("error: ")
                .to_string();
            let err = CliError::Usage(first);
            let _ = writeln!(stderr, "{}", err.line());
            return err.exit_code();
        }
    };
    match execute(&cli) {
        Ok(report) => {
            for w in &report.warnings {
                let _ = writeln!(stderr, "warning message={}", error::quote(w));
            }
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "{}", e.line());
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    let (mode, args) = cli.command.parts();
    let mut overrides = args.set.clone();
    if let Some(seed) = args.seed {
        overrides.push(format!("seed={seed}"));
    }
    let config = ExperimentConfig::load(&args.config, mode, &overrides)?;
    let out = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(format!("cavkin-{}", mode.name())));
    match args.workers {
        Some(0) => Err(CliError::Usage("--workers must be at least 1".into())),
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {w} workers: {e}")))?
            .install(|| run(&config, &out)),
        None => run(&config, &out),
    }
}
