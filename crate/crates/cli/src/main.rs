//! `imgkg`: build and query a product knowledge graph from product images.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use imgkg_core::pipeline::EnrollmentMode;

use config::BackendArgs;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

#[derive(Debug, Parser)]
#[command(name = "imgkg", version, about = "Product knowledge graphs from product images")]
struct Cli {
    /// TOML file with defaults for paths, backends and enrollment settings.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Log verbosity: error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info", value_name = "LEVEL")]
    log_level: tracing::Level,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Property schema commands.
    #[command(subcommand)]
    Schema(SchemaCommand),
    /// Enroll product images into an inventory graph.
    Enroll(EnrollArgs),
    /// Score every mode against an annotated dataset.
    Benchmark(BenchmarkArgs),
    /// Export an inventory graph to another format.
    Export(ExportArgs),
}

#[derive(Debug, Subcommand)]
enum SchemaCommand {
    /// Write a property schema.
    Init(SchemaInitArgs),
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = false)]
pub struct SchemaSource {
    /// Use the built-in packaged-goods schema.
    #[arg(long = "default", group = "source")]
    pub default: bool,
    /// Ask the language model for the property list.
    #[arg(long, group = "source")]
    pub auto: bool,
    /// Read property names, one per line, from FILE.
    #[arg(long, group = "source", value_name = "FILE")]
    pub manual: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SchemaInitArgs {
    #[command(flatten)]
    pub source: SchemaSource,
    #[arg(long, value_name = "FILE", default_value = "schema.toml")]
    pub out: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct EnrollArgs {
    /// Image (or `.txt` description) files to enroll, in order.
    #[arg(value_name = "PATH")]
    pub inputs: Vec<PathBuf>,
    /// JSON-lines manifest of inputs, enrolled after the positional paths.
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub schema: Option<PathBuf>,
    /// Inventory file; created when missing.
    #[arg(long, value_name = "FILE")]
    pub inventory: Option<PathBuf>,
    /// Directory for per-product enrollment records.
    #[arg(long, value_name = "DIR")]
    pub records_dir: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<EnrollmentMode>,
    /// Intermediate categories inserted per hierarchy chain.
    #[arg(long, value_name = "N")]
    pub depth: Option<u32>,
    /// Hierarchy chains sampled per product.
    #[arg(long, value_name = "K")]
    pub parallel: Option<u32>,
    /// Products prepared concurrently.
    #[arg(long, value_name = "N")]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// JSON-lines annotations, one image per line.
    #[arg(long, value_name = "FILE")]
    pub annotations: PathBuf,
    #[arg(long, value_name = "FILE")]
    pub schema: Option<PathBuf>,
    /// Comma-separated modes; all modes when omitted.
    #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
    pub modes: Vec<EnrollmentMode>,
    #[arg(long, value_name = "DIR", default_value = "benchmark")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long, value_name = "FILE")]
    pub inventory: Option<PathBuf>,
    /// Exporter name: graphml or statements.
    #[arg(long)]
    pub format: String,
    /// Output file; standard output when omitted.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

fn parse_mode(name: &str) -> Result<EnrollmentMode, String> {
    EnrollmentMode::parse(name).ok_or_else(|| {
        let names: Vec<&str> = EnrollmentMode::ALL.iter().map(|m| m.name()).collect();
        format!("unknown mode {name:?}; expected one of {}", names.join(", "))
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_ansi(false)
        .with_max_level(cli.log_level)
        .init();
    let result = config::CliConfig::load(cli.config.as_deref()).and_then(|file| match cli.command {
        Command::Schema(SchemaCommand::Init(args)) => commands::schema_init(&args, &file),
        Command::Enroll(args) => commands::enroll(&args, &file),
        Command::Benchmark(args) => commands::benchmark(&args, &file),
        Command::Export(args) => commands::export(&args, &file),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(message)) => {
            eprintln!("imgkg: usage error: {message}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("imgkg: error: {e:#}");
            ExitCode::from(1)
        }
    }
}
