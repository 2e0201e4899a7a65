//! The `embed` command.

use std::path::{Path, PathBuf};

use prioembed::bound::BoundVars;
use prioembed::petal::SpanningTreeError;
use prioembed::tree_embed::TreeEmbedError;
use prioembed::ultrametric::UltrametricError;
use prioembed::{
    build_ultrametric, default_priority_function, embed_linf_dimension, embed_linf_distortion,
    petal_decomposition_spanning_tree, prioritized_tree_embedding, validate_priority_function, BoundSpec,
    MetricSpace, PriorityFunction, PriorityOrdering, SampleConfig, WeightedGraph, WeightedTree,
};

use crate::artifact::{emit, parse, read_bytes, sha256_hex, to_json, EmbedOutput, LevelInfo, Mode};
use crate::manifest::RunManifest;
use crate::{CliError, Format};

#[derive(Debug, clap::Args)]
pub struct EmbedArgs {
    #[arg(value_enum)]
    pub mode: Mode,
    #[arg(long)]
    pub input: PathBuf,
    /// JSON `{"perm": [...]}`; identity when omitted.
    #[arg(long)]
    pub ordering: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2)]
    pub k: u32,
    #[arg(long, default_value_t = 16)]
    pub c: u32,
    /// Priority function: `default` or an expression in `j` and `n`.
    #[arg(long, default_value = "default")]
    pub alpha: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Manifest path; defaults to `<out>.manifest.json` when `--out` is set.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

/// Everything an embedding run depends on.
#[derive(Debug, Clone)]
pub struct EmbedRequest {
    pub mode: Mode,
    pub input: Vec<u8>,
    pub ordering: Option<Vec<u8>>,
    pub seed: u64,
    pub k: u32,
    pub c: u32,
    pub alpha: String,
}

/// The priority function named by `spec`, certified on `1..=n`.
pub fn resolve_alpha(spec: &str, n: usize) -> Result<PriorityFunction, CliError> {
    if spec == "default" {
        return Ok(default_priority_function(n));
    }
    let expr: BoundSpec = spec.parse().map_err(|e| CliError::invalid(format!("--alpha: {e}")))?;
    let values = (1..=n.max(1))
        .map(|j| expr.eval(&BoundVars { j, n, ..Default::default() }))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::invalid(format!("--alpha: {e}")))?;
    validate_priority_function(|j| values[j - 1].clone(), n.max(1), spec)
        .map_err(|e| CliError::invalid(format!("--alpha: {e}")))
}

pub fn ordering_for(bytes: Option<&[u8]>, n: usize) -> Result<PriorityOrdering, CliError> {
    let ord = match bytes {
        Some(b) => parse::<PriorityOrdering>(b, "ordering")?,
        None => PriorityOrdering::identity(n),
    };
    ord.expect_len(n).map_err(|e| CliError::invalid(e.to_string()))?;
    Ok(ord)
}

fn sample_config(req: &EmbedRequest) -> SampleConfig {
    SampleConfig { k: req.k, c: req.c, seed: req.seed }
}

pub fn run_embed(req: &EmbedRequest) -> Result<EmbedOutput, CliError> {
    let ord_bytes = req.ordering.as_deref();
    match req.mode {
        Mode::Tree => {
            let t: WeightedTree = parse(&req.input, "tree")?;
            let ord = ordering_for(ord_bytes, t.n_real())?;
            let out = prioritized_tree_embedding(&t, &ord).map_err(|e| match e {
                TreeEmbedError::Ordering(e) => CliError::invalid(e.to_string()),
                TreeEmbedError::Fold(e) => CliError::internal(e.to_string()),
            })?;
            let levels = out
                .levels
                .iter()
                .map(|l| LevelInfo { first: l.ranks.0, last: l.ranks.1, dim: l.dim })
                .collect();
            Ok(EmbedOutput::Tree { embedding: out.embedding, levels })
        }
        Mode::LinfDistortion | Mode::LinfDimension => {
            let m: MetricSpace = parse(&req.input, "metric")?;
            let ord = ordering_for(ord_bytes, m.len())?;
            let cfg = sample_config(req);
            let f = if req.mode == Mode::LinfDistortion {
                embed_linf_distortion(&m, &ord, &cfg)
            } else {
                embed_linf_dimension(&m, &ord, &cfg)
            }
            .map_err(|e| CliError::invalid(e.to_string()))?;
            let (k, c, seed) = (req.k, req.c, req.seed);
            Ok(if req.mode == Mode::LinfDistortion {
                EmbedOutput::LinfDistortion { k, c, seed, embedding: f.embedding, coordinates: f.coordinates }
            } else {
                EmbedOutput::LinfDimension { k, c, seed, embedding: f.embedding, coordinates: f.coordinates }
            })
        }
        Mode::Ultrametric => {
            let m: MetricSpace = parse(&req.input, "metric")?;
            let ord = ordering_for(ord_bytes, m.len())?;
            let alpha = resolve_alpha(&req.alpha, m.len())?;
            let tree = build_ultrametric(&m, &ord, &alpha).map_err(|e| match e {
                UltrametricError::Overgrown { .. } | UltrametricError::Malformed(_) => CliError::internal(e.to_string()),
                _ => CliError::invalid(e.to_string()),
            })?;
            Ok(EmbedOutput::Ultrametric { alpha: req.alpha.clone(), tree })
        }
        Mode::SpanningTree => {
            let g: WeightedGraph = parse(&req.input, "graph")?;
            let ord = ordering_for(ord_bytes, g.len())?;
            let alpha = resolve_alpha(&req.alpha, g.len())?;
            let tree = petal_decomposition_spanning_tree(&g, &ord, &alpha).map_err(|e| match e {
                SpanningTreeError::Invariant(_) | SpanningTreeError::Invalid(_) => CliError::internal(e.to_string()),
                _ => CliError::invalid(e.to_string()),
            })?;
            Ok(EmbedOutput::SpanningTree { alpha: req.alpha.clone(), tree })
        }
    }
}

fn manifest_path(args: &EmbedArgs) -> Option<PathBuf> {
    args.manifest.clone().or_else(|| {
        args.out.as_ref().map(|o| {
            let mut s = o.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    })
}

/// Absolute path when it resolves, the given text otherwise.
fn display(p: &Path) -> String {
    std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf()).display().to_string()
}

pub fn run(args: &EmbedArgs) -> Result<(), CliError> {
    let input = read_bytes(&args.input)?;
    let ordering = args.ordering.as_deref().map(read_bytes).transpose()?;
    let req = EmbedRequest {
        mode: args.mode,
        input,
        ordering,
        seed: args.seed,
        k: args.k,
        c: args.c,
        alpha: args.alpha.clone(),
    };
    let bytes = to_json(&run_embed(&req)?);
    emit(args.out.as_deref(), &bytes)?;
    if let Some(path) = manifest_path(args) {
        let m = RunManifest {
            command: "embed".into(),
            mode: args.mode,
            input: display(&args.input),
            input_digest: sha256_hex(&req.input),
            ordering: args.ordering.as_deref().map(display),
            ordering_digest: req.ordering.as_deref().map(sha256_hex),
            seed: args.seed,
            k: args.k,
            c: args.c,
            alpha: args.alpha.clone(),
            output: args.out.as_deref().map(display),
            output_digest: sha256_hex(&bytes),
            audits: Vec::new(),
        };
        emit(Some(&path), &m.to_bytes())?;
    }
    Ok(())
}
