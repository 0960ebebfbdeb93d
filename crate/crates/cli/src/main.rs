//! `iwt`: simulate, fit, describe, synthesize and serve.
//!
//! Exit codes: 0 success, 1 runtime halt, 2 usage or validation error.

mod commands;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "iwt", version, about = "Icing wind tunnel water/air injection plant model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum TraceFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ModelKind {
    Polynomial,
    Tree,
    Mlp,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum PolyStructure {
    /// Intercept plus one term per input.
    Linear,
    /// All products of distinct inputs, with intercept.
    Interactions,
    /// Intercept plus the first input times every product of the others.
    Factor,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Search {
    Coarse,
    Full,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trace.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Plant configuration; built-in defaults when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Defaults to the output file extension, else csv.
        #[arg(long, value_enum)]
        format: Option<TraceFormat>,
    },
    /// Fit a predictor to a dataset CSV and print its report.
    Fit {
        #[arg(long)]
        data: PathBuf,
        /// Target column name, e.g. T_n or MVD.
        #[arg(long)]
        target: String,
        #[arg(long, value_enum)]
        kind: ModelKind,
        #[arg(long)]
        out: PathBuf,
        /// Comma separated input columns; the published inputs for the
        /// target when absent.
        #[arg(long, value_delimiter = ',')]
        inputs: Option<Vec<String>>,
        #[arg(long, value_enum, default_value = "linear")]
        structure: PolyStructure,
        #[arg(long, default_value_t = 4)]
        max_depth: usize,
        #[arg(long, default_value_t = 1)]
        min_leaf: usize,
        #[arg(long, value_enum, default_value = "coarse")]
        search: Search,
        #[arg(long, default_value_t = 1500)]
        epochs: usize,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Also write the report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Summary statistics, correlations and feature rankings of a dataset.
    Describe {
        #[arg(long)]
        data: PathBuf,
        /// Compare against the published tables (for the original data).
        #[arg(long)]
        reference: bool,
        /// Target for the MIG and F-score rankings.
        #[arg(long, default_value = "T_n")]
        target: String,
    },
    /// Generate a synthetic dataset matching the published statistics.
    Synthesize {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a live session with the websocket and HTTP endpoints.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Replay this scenario; interactive from the default initial state
        /// when absent.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Simulation steps per wall-clock second (1 = real time at Δt = 1 s).
        #[arg(long, default_value_t = 1.0)]
        rate: f64,
        /// Step as fast as possible.
        #[arg(long)]
        accelerated: bool,
        /// Publish every n-th snapshot.
        #[arg(long, default_value_t = 1)]
        decimate: u64,
        /// Serve dashboard assets from this directory instead of the
        /// built-in page.
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Halt(anyhow::Error),
}

impl Failure {
    pub fn usage(e: impl Into<anyhow::Error>) -> Self {
        Self::Usage(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("IWT_LOG", "info").write_style("IWT_LOG_STYLE")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { scenario, config, out, format } => commands::simulate(&scenario, config.as_deref(), &out, format),
        Command::Fit {
            data,
            target,
            kind,
            out,
            inputs,
            structure,
            max_depth,
            min_leaf,
            search,
            epochs,
            folds,
            seed,
            report,
        } => commands::fit(commands::FitArgs {
            data,
            target,
            kind,
            out,
            inputs,
            structure,
            max_depth,
            min_leaf,
            search,
            epochs,
            folds,
            seed,
            report,
        }),
        Command::Describe { data, reference, target } => commands::describe(&data, reference, &target),
        Command::Synthesize { n, seed, out } => commands::synthesize(n, seed, &out),
        Command::Serve {
            config,
            scenario,
            host,
            port,
            rate,
            accelerated,
            decimate,
            static_dir,
        } => serve::run(serve::ServeArgs {
            config,
            scenario,
            host,
            port,
            rate,
            accelerated,
            decimate,
            static_dir,
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Halt(e)) => {
            eprintln!("halted: {e:#}");
            ExitCode::from(1)
        }
    }
}
