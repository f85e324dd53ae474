//! `provcube`: run process graphs locally with provenance, validate them,
//! inspect PROV-JSON documents, or serve the job back-end.
//!
//! Exit codes: 0 success, 2 parse, 3 validation, 4 execution, 5 i/o,
//! 64 usage or configuration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod error;

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "provcube", version, about = "Provenance-aware openEO process-graph engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute a process graph locally and record its provenance.
    Run(RunArgs),
    /// Check a process graph without executing it.
    Validate {
        #[arg(long)]
        graph: PathBuf,
    },
    /// Start the job service.
    Serve(ServeArgs),
    /// Inspect a PROV-JSON document.
    #[command(subcommand)]
    Prov(ProvCommand),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Result file; `.csv` selects CSV, anything else cube-json.
    /// Defaults to `<graph>.result.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Defaults to `<graph>.prov.json`.
    #[arg(long)]
    pub prov_out: Option<PathBuf>,
    #[arg(long)]
    pub dot_out: Option<PathBuf>,
    #[arg(long)]
    pub grid_step: Option<f64>,
    #[arg(long, action = clap::ArgAction::Set, default_value_t = true)]
    pub allow_nonfinite: bool,
    /// Print each node as it starts and finishes.
    #[arg(short, long)]
    pub verbose: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Environment variable holding the URL-signing secret.
    #[arg(long, default_value = provcube_service::config::DEFAULT_SECRET_VAR)]
    pub secret_env: String,
}

#[derive(Debug, Subcommand)]
enum ProvCommand {
    /// Print counts, total duration and critical path length.
    Stats { file: PathBuf },
    /// Write the document as Graphviz DOT.
    ExportDot {
        file: PathBuf,
        /// Defaults to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(CliError::USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(args) => commands::run(&args),
        Command::Validate { graph } => commands::validate(&graph),
        Command::Serve(args) => commands::serve(&args),
        Command::Prov(ProvCommand::Stats { file }) => commands::prov_stats(&file),
        Command::Prov(ProvCommand::ExportDot { file, out }) => commands::export_dot(&file, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
