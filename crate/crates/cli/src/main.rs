//! `crossmap`: validate, apply, compose and audit crossmaps from the command line.

mod commands;
mod context;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::context::{append_provenance, Context};
use crate::failure::ExitStatus;

#[derive(Parser, Debug)]
#[command(
    name = "crossmap",
    version,
    about = "Mass-preserving crossmaps with exact rational weights"
)]
pub struct Cli {
    /// Machine-readable JSON reports.
    #[arg(long, global = true)]
    pub json: bool,

    /// Append a JSON provenance record (input digests, options, result) to this file.
    #[arg(long, global = true, value_name = "FILE")]
    pub provenance: Option<PathBuf>,

    /// How weights are written in edge-list output.
    #[arg(long, global = true, value_enum, default_value_t = Weights::Fraction)]
    pub weights: Weights,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Weights {
    /// Exact p/q.
    Fraction,
    /// Terminating decimals where exact, p/q otherwise.
    Decimal,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Check that an edge list is a valid crossmap.
    Validate(ValidateArgs),
    /// Redistribute one or more arrays through a crossmap.
    Apply(ApplyArgs),
    /// Compose crossmaps left to right into one.
    Compose(ComposeArgs),
    /// Reverse a crossmap when the reversal is mass-preserving.
    Reverse(MapOutArgs),
    /// List connected components and their relation types.
    Classify(MapArgs),
    /// Per-target summary and imputation metrics.
    Summarize(SummarizeArgs),
    /// Recover the crossmap embedded in an external command by probing it.
    Extract(ExtractArgs),
    /// Turn an unweighted crosswalk into a crossmap.
    ImportCrosswalk(ImportArgs),
    /// Write a Graphviz DOT rendering of a crossmap.
    ExportDot(MapOutArgs),
    /// Write the dense source-by-target weight matrix as CSV.
    ExportMatrix(MapOutArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct ValidateArgs {
    /// Edge-list CSV (`-` for standard input).
    pub edges: String,
}

#[derive(Args, Debug, Serialize)]
pub struct MapArgs {
    /// Edge-list CSV (`-` for standard input).
    pub edges: String,
}

#[derive(Args, Debug, Serialize)]
pub struct MapOutArgs {
    /// Edge-list CSV (`-` for standard input).
    pub edges: String,
    /// Output file (standard output if omitted).
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct ApplyArgs {
    /// Edge-list CSV of the crossmap.
    #[arg(long)]
    pub map: String,
    /// Array CSV; repeat to transform several arrays with the same map.
    #[arg(long, required = true)]
    pub data: Vec<String>,
    /// Drop array keys the crossmap does not cover, reporting their mass.
    #[arg(long)]
    pub drop_uncovered: bool,
    /// Omit targets that receive zero mass.
    #[arg(long)]
    pub drop_zeros: bool,
    /// Output array CSV for a single input (standard output if omitted).
    #[arg(long, conflicts_with = "out_dir")]
    pub out: Option<String>,
    /// Directory for outputs when several arrays are given; files keep their names.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ComposeArgs {
    /// Edge-list CSVs in application order.
    #[arg(num_args = 2.., required = true)]
    pub maps: Vec<String>,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct SummarizeArgs {
    pub edges: String,
    /// Array CSV used for the realized split-mass share.
    #[arg(long)]
    pub data: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct ExtractArgs {
    /// Command to probe, e.g. "python3 recode.py"; reads an array CSV on
    /// stdin and writes one on stdout.
    #[arg(long)]
    pub cmd: String,
    /// Source keys to probe, one per line.
    #[arg(long)]
    pub keys: String,
    /// Allowed distance of per-source totals (and snapped weights) from exact.
    #[arg(long, default_value = "1e-9")]
    pub tolerance: String,
    /// Snap weights to the nearest fraction with at most this denominator.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub rationalize_max_den: Option<u64>,
    /// Concurrent probes.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Source keys probed twice to check determinism.
    #[arg(long, default_value_t = 1)]
    pub determinism_sample: usize,
    #[arg(long)]
    pub out: Option<String>,
}

#[derive(Args, Debug, Serialize)]
pub struct ImportArgs {
    /// Crosswalk CSV with header `from,to`.
    pub crosswalk: String,
    /// Split multi-target sources equally instead of rejecting them.
    #[arg(long)]
    pub equal_split: bool,
    #[arg(long)]
    pub out: Option<String>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Apply(_) => "apply",
            Command::Compose(_) => "compose",
            Command::Reverse(_) => "reverse",
            Command::Classify(_) => "classify",
            Command::Summarize(_) => "summarize",
            Command::Extract(_) => "extract",
            Command::ImportCrosswalk(_) => "import-crosswalk",
            Command::ExportDot(_) => "export-dot",
            Command::ExportMatrix(_) => "export-matrix",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut ctx = Context::default();
    let result = commands::run(&cli, &mut ctx);
    let status = match &result {
        Ok(()) => ExitStatus::Success,
        Err(failure) => {
            eprintln!("{}", failure.render(cli.json));
            failure.status
        }
    };
    if let Some(path) = &cli.provenance {
        let options = serde_json::json!({ "args": cli.command, "weights": cli.weights });
        if let Err(e) = append_provenance(path, cli.command.name(), &options, &ctx, status as i32) {
            eprintln!("error: {}: {e}", path.display());
            return ExitCode::from(ExitStatus::Usage as u8);
        }
    }
    ExitCode::from(status as u8)
}
