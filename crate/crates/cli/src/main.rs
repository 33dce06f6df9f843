//! Batch front end: loads ensemble configurations, runs the response engines
//! and analyses, and emits plot-ready CSV/JSON with a reproducible manifest.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Error taxonomy mapped onto exit codes: configuration problems exit 2,
/// numeric failures 3, I/O problems 4.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Io(String),
}

impl CliError {
    pub fn config(msg: String) -> Self {
        CliError::Config(msg)
    }
    pub fn numeric(msg: String) -> Self {
        CliError::Numeric(msg)
    }
    pub fn io(msg: String) -> Self {
        CliError::Io(msg)
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Numeric(m) | CliError::Io(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "polariton",
    version,
    about = "Linear response of molecular ensembles strongly coupled to a lossy cavity mode"
)]
struct Cli {
    /// Worker threads for the frequency sweeps (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct RunArgs {
    /// Run configuration (a config JSON or a manifest from a previous run)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in preset: fig2a or fig2b
    #[arg(long)]
    preset: Option<String>,
    /// Frequency grid as MIN:MAX:POINTS
    #[arg(long)]
    grid: Option<String>,
    /// Comma-separated engines: dense, cf_full, trunc:K, d0, d1, d0+d1, d2_x2, dyson:M
    #[arg(long)]
    engines: Option<String>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated molecule counts to sweep at fixed collective coupling
    #[arg(long = "sweep-N", value_name = "LIST")]
    sweep_n: Option<String>,
}

impl RunArgs {
    fn overrides(&self) -> config::Overrides {
        config::Overrides {
            config: self.config.clone(),
            preset: self.preset.clone(),
            grid: self.grid.clone(),
            engines: self.engines.clone(),
            out: self.out.clone(),
            sweep_n: self.sweep_n.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute spectra with the selected engines and write plot-ready CSV
    Spectrum(RunArgs),
    /// Cross-compare engines and write a difference report
    Compare(RunArgs),
    /// Tabulate the irreducible susceptibilities on the grid
    Chi(RunArgs),
    /// Enumerate Dyson walks with ladder strings, classes and values
    Dyson(RunArgs),
    /// Polariton mode frequencies as non-Hermitian eigenvalues
    Modes(RunArgs),
    /// Print the fully resolved configuration of a named preset
    Preset { name: String },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }

    match cli.command {
        Command::Spectrum(args) => commands::run_spectrum(&config::resolve(&args.overrides())?),
        Command::Compare(args) => commands::run_compare(&config::resolve(&args.overrides())?),
        Command::Chi(args) => commands::run_chi(&config::resolve(&args.overrides())?),
        Command::Dyson(args) => commands::run_dyson(&config::resolve(&args.overrides())?),
        Command::Modes(args) => commands::run_modes(&config::resolve(&args.overrides())?),
        Command::Preset { name } => {
            let resolved = config::run_preset(&name)?;
            let text =
                serde_json::to_string_pretty(&resolved).map_err(|e| CliError::io(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
