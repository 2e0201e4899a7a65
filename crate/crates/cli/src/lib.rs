//! Batch front end: instance generators, embedding runners, audits and
//! artifact validation.
//!
//! Exit codes: 0 success, 1 violated audit bound, 2 invalid input or
//! usage, 3 internal invariant breach.

pub mod artifact;
pub mod audit;
pub mod embed;
pub mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use prioembed::generate::{random_graph, random_metric, random_ordering, random_tree, GraphShape};
use prioembed::{MetricSpace, PriorityOrdering, WeightedGraph, WeightedTree};

use crate::artifact::{emit, load, to_json, EmbedOutput, Mode};
use crate::audit::AuditArgs;
use crate::embed::EmbedArgs;
use crate::manifest::RunManifest;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn violated(message: impl Into<String>) -> CliError {
        CliError { code: 1, message: message.into() }
    }

    pub fn invalid(message: impl Into<String>) -> CliError {
        CliError { code: 2, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> CliError {
        CliError { code: 3, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "prioembed", version, about = "Prioritized metric embeddings with exact audits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a random instance.
    Gen(GenArgs),
    /// Embed an instance and write the result plus a run manifest.
    Embed(EmbedArgs),
    /// Check an embedding against per-priority bounds.
    Audit(AuditArgs),
    /// Validate an artifact, or reproduce a run from its manifest.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Metric,
    Graph,
    Tree,
    Ordering,
}

#[derive(Debug, clap::Args)]
pub struct GenArgs {
    pub kind: GenKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest integer tree edge weight.
    #[arg(long, default_value_t = 100)]
    pub max_weight: i64,
    /// Probability of each non-tree edge in random graphs.
    #[arg(long, default_value_t = 0.1)]
    pub edge_prob: f64,
    #[arg(long, default_value_t = 100)]
    pub max_numer: i64,
    #[arg(long, default_value_t = 4)]
    pub max_denom: i64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ValidateKind {
    Metric,
    Graph,
    Tree,
    Ordering,
    Embedding,
    Manifest,
}

#[derive(Debug, clap::Args)]
pub struct ValidateArgs {
    pub kind: ValidateKind,
    pub file: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

pub fn gen_bytes(args: &GenArgs) -> Result<Vec<u8>, CliError> {
    let shape = GraphShape { extra_edge_prob: args.edge_prob, max_numer: args.max_numer, max_denom: args.max_denom };
    let bad = |e: prioembed::generate::GenError| CliError::invalid(e.to_string());
    Ok(match args.kind {
        GenKind::Metric => to_json(&random_metric(args.n, &shape, args.seed).map_err(bad)?),
        GenKind::Graph => to_json(&random_graph(args.n, &shape, args.seed).map_err(bad)?),
        GenKind::Tree => to_json(&random_tree(args.n, args.max_weight, args.seed).map_err(bad)?),
        GenKind::Ordering => {
            if args.n == 0 {
                return Err(CliError::invalid("instance size must be at least 1"));
            }
            to_json(&random_ordering(args.n, args.seed))
        }
    })
}

fn validate(args: &ValidateArgs) -> Result<Vec<u8>, CliError> {
    let summary = match args.kind {
        ValidateKind::Metric => {
            let m: MetricSpace = load(&args.file, "metric")?;
            serde_json::json!({ "valid": true, "kind": "metric", "n": m.len() })
        }
        ValidateKind::Graph => {
            let g: WeightedGraph = load(&args.file, "graph")?;
            serde_json::json!({ "valid": true, "kind": "graph", "n": g.len(), "edges": g.edges().len() })
        }
        ValidateKind::Tree => {
            let t: WeightedTree = load(&args.file, "tree")?;
            serde_json::json!({ "valid": true, "kind": "tree", "vertices": t.len(), "real": t.n_real() })
        }
        ValidateKind::Ordering => {
            let o: PriorityOrdering = load(&args.file, "ordering")?;
            serde_json::json!({ "valid": true, "kind": "ordering", "n": o.len() })
        }
        ValidateKind::Embedding => {
            let e: EmbedOutput = load(&args.file, "embedding artifact")?;
            let mode: Mode = e.mode();
            serde_json::json!({ "valid": true, "kind": "embedding", "mode": mode })
        }
        ValidateKind::Manifest => {
            let m: RunManifest = load(&args.file, "manifest")?;
            m.reproduce()?;
            serde_json::json!({ "valid": true, "kind": "manifest", "reproduced": m.output_digest })
        }
    };
    Ok(to_json(&summary))
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(args) => emit(args.out.as_deref(), &gen_bytes(&args)?),
        Command::Embed(args) => embed::run(&args),
        Command::Audit(args) => audit::run(&args),
        Command::Validate(args) => emit(None, &validate(&args)?),
    }
}
