//! The `audit` command: exhaustive per-priority checks of an embedding.

use std::path::PathBuf;

use prioembed::audit::distortion_report_with;
use prioembed::bound::defaults;
use prioembed::{
    dimension_report, distortion_report, shortest_path_metric, BoundSpec, BoundVars, DistortionReport, Extended,
    MetricSpace, PriorityFunction, PriorityOrdering, Scalar, WeightedGraph, WeightedTree,
};
use serde::{Deserialize, Serialize};

use crate::artifact::{emit, load, parse, read_bytes, to_json, EmbedOutput, Mode};
use crate::embed::{ordering_for, resolve_alpha, run_embed, EmbedRequest};
use crate::manifest::{AuditVerdict, RunManifest};
use crate::{CliError, Format};

#[derive(Debug, clap::Args)]
pub struct AuditArgs {
    /// The instance the embedding was built from.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub ordering: Option<PathBuf>,
    /// Output of `embed`.
    #[arg(long)]
    pub embedding: PathBuf,
    /// Allowed distortion per priority; defaults to the mode's guarantee.
    #[arg(long)]
    pub bound: Option<String>,
    /// Allowed prioritized dimension per priority.
    #[arg(long)]
    pub dimension_bound: Option<String>,
    /// Priority function used by `alpha(j)` in bounds of embedding modes.
    #[arg(long, default_value = "default")]
    pub alpha: String,
    /// Seeds to try for randomized modes, counting the artifact's own.
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
    /// Scan pairs on one thread.
    #[arg(long)]
    pub serial: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Manifest to append the verdict to.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub j: usize,
    pub point: usize,
    pub witness: usize,
    pub kind: String,
    pub achieved: Extended,
    pub allowed: Scalar,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Row {
    pub j: usize,
    pub point: usize,
    pub distortion: Extended,
    pub allowed: Scalar,
    pub witness: usize,
    pub beta: Option<usize>,
    pub beta_allowed: Option<Scalar>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attempt {
    pub seed: Option<u64>,
    pub passed: bool,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub mode: Mode,
    pub bound: String,
    pub dimension_bound: Option<String>,
    pub passed: bool,
    pub attempts: Vec<Attempt>,
    /// Table of the last attempt.
    pub per_j: Vec<Row>,
}

enum Instance {
    Tree(MetricSpace),
    Metric(MetricSpace),
    Graph(WeightedGraph, MetricSpace),
}

impl Instance {
    fn load(mode: Mode, bytes: &[u8]) -> Result<Instance, CliError> {
        Ok(match mode {
            Mode::Tree => Instance::Tree(parse::<WeightedTree>(bytes, "tree")?.real_metric()),
            Mode::SpanningTree => {
                let g: WeightedGraph = parse(bytes, "graph")?;
                let d = shortest_path_metric(&g).map_err(|e| CliError::invalid(e.to_string()))?;
                Instance::Graph(g, d)
            }
            _ => Instance::Metric(parse(bytes, "metric")?),
        })
    }

    fn metric(&self) -> &MetricSpace {
        match self {
            Instance::Tree(m) | Instance::Metric(m) | Instance::Graph(_, m) => m,
        }
    }
}

/// Inputs shared by every attempt.
pub struct AuditPlan<'a> {
    pub input: &'a [u8],
    pub ordering: Option<&'a [u8]>,
    pub bound: Option<&'a str>,
    pub dimension_bound: Option<&'a str>,
    pub alpha: &'a str,
    pub retries: u32,
    pub parallel: bool,
}

fn default_bound(mode: Mode) -> &'static str {
    match mode {
        Mode::Tree => defaults::TREE_DISTORTION,
        Mode::LinfDistortion => defaults::LINF_DISTORTION,
        Mode::LinfDimension => defaults::LINF_DIMENSION_DISTORTION,
        Mode::Ultrametric => defaults::ULTRAMETRIC,
        Mode::SpanningTree => defaults::SPANNING_TREE,
    }
}

fn spec(s: &str) -> Result<BoundSpec, CliError> {
    s.parse().map_err(|e| CliError::invalid(format!("bound `{s}`: {e}")))
}

fn distortion_of(inst: &Instance, ord: &PriorityOrdering, out: &EmbedOutput, parallel: bool) -> Result<DistortionReport, CliError> {
    let m = inst.metric();
    let n = m.len();
    match out {
        EmbedOutput::Ultrametric { tree, .. } => {
            if tree.points() != n {
                return Err(CliError::invalid(format!("ultrametric has {} leaves, input has {n} points", tree.points())));
            }
            let d = tree.distance_matrix();
            Ok(distortion_report_with(m, ord, |a, b| d[a][b].clone(), parallel))
        }
        EmbedOutput::SpanningTree { tree, .. } => {
            let Instance::Graph(g, _) = inst else { unreachable!("mode fixes the instance kind") };
            let t = tree.validate(g).map_err(|e| CliError::invalid(e.to_string()))?;
            let dt = t.real_metric();
            Ok(distortion_report_with(m, ord, |a, b| dt.d(a, b).clone(), parallel))
        }
        _ => {
            let f = out.embedding().expect("embedding modes carry vectors");
            if f.len() != n {
                return Err(CliError::invalid(format!("embedding has {} vectors, input has {n} points", f.len())));
            }
            Ok(distortion_report(m, f, ord, parallel))
        }
    }
}

fn check(
    inst: &Instance,
    ord: &PriorityOrdering,
    out: &EmbedOutput,
    bound: &BoundSpec,
    dim: Option<&BoundSpec>,
    alpha: Option<&PriorityFunction>,
    parallel: bool,
) -> Result<(Attempt, Vec<Row>), CliError> {
    let n = inst.metric().len();
    let (k, c, seed) = match out {
        EmbedOutput::LinfDistortion { k, c, seed, .. } | EmbedOutput::LinfDimension { k, c, seed, .. } => {
            (*k, *c, Some(*seed))
        }
        _ => (0, 0, None),
    };
    let report = distortion_of(inst, ord, out, parallel)?;
    let betas = out.embedding().map(|f| dimension_report(f, ord).per_j);
    let tree_target = matches!(out.mode(), Mode::Ultrametric | Mode::SpanningTree);
    let one = Scalar::ONE;
    let mut violations = Vec::new();
    let mut rows = Vec::with_capacity(report.per_j.len());
    let eval = |b: &BoundSpec, j: usize| {
        b.eval(&BoundVars { j, n, k, c, alpha }).map_err(|e| CliError::invalid(format!("bound `{b}` at j = {j}: {e}")))
    };
    for s in &report.per_j {
        let allowed = eval(bound, s.j)?;
        let mut flag = |kind: &str, achieved: Extended, allowed: &Scalar, witness: usize| {
            violations.push(Violation { j: s.j, point: s.point, witness, kind: kind.into(), achieved, allowed: allowed.clone() });
        };
        // the side that must stay within 1, and the side priced by the bound
        let (tight, tight_w, loose, loose_w) = if tree_target {
            (s.contraction.clone(), s.contraction_witness, Extended::Finite(s.expansion.clone()), s.expansion_witness)
        } else {
            (Extended::Finite(s.expansion.clone()), s.expansion_witness, s.contraction.clone(), s.contraction_witness)
        };
        let (tight_kind, loose_kind) = if tree_target { ("contraction", "expansion") } else { ("expansion", "contraction") };
        if tight > Extended::Finite(one.clone()) {
            flag(tight_kind, tight, &one, tight_w);
        }
        if loose > Extended::Finite(allowed.clone()) {
            flag(loose_kind, loose, &allowed, loose_w);
        }
        let (beta, beta_allowed) = match (&betas, dim) {
            (Some(b), Some(d)) => {
                let lim = eval(d, s.j)?;
                let got = b[s.j - 1];
                if Scalar::from(got) > lim {
                    flag("dimension", Extended::Finite(Scalar::from(got)), &lim, s.point);
                }
                (Some(got), Some(lim))
            }
            (Some(b), None) => (Some(b[s.j - 1]), None),
            _ => (None, None),
        };
        rows.push(Row {
            j: s.j,
            point: s.point,
            distortion: s.distortion.clone(),
            allowed,
            witness: s.distortion_witness,
            beta,
            beta_allowed,
        });
    }
    Ok((Attempt { seed, passed: violations.is_empty(), violations }, rows))
}

/// Audits `out` and, for randomized modes, re-embeds with the next seeds
/// until one passes or `retries` seeds have been tried.
pub fn audit_output(plan: &AuditPlan, out: &EmbedOutput) -> Result<AuditReport, CliError> {
    let mode = out.mode();
    let inst = Instance::load(mode, plan.input)?;
    let n = inst.metric().len();
    let ord = ordering_for(plan.ordering, n)?;
    let bound_src = plan.bound.unwrap_or(default_bound(mode)).to_string();
    let dim_src = plan.dimension_bound.map(str::to_string).or_else(|| {
        (mode == Mode::Tree).then(|| defaults::TREE_DIMENSION.to_string())
    });
    let bound = spec(&bound_src)?;
    let dim = dim_src.as_deref().map(spec).transpose()?;
    let alpha_src = match out {
        EmbedOutput::Ultrametric { alpha, .. } | EmbedOutput::SpanningTree { alpha, .. } => alpha.as_str(),
        _ => plan.alpha,
    };
    let alpha = if n >= 1 { Some(resolve_alpha(alpha_src, n)?) } else { None };

    let mut attempts = Vec::new();
    let (first, mut rows) = check(&inst, &ord, out, &bound, dim.as_ref(), alpha.as_ref(), plan.parallel)?;
    let mut passed = first.passed;
    attempts.push(first);
    if let (false, EmbedOutput::LinfDistortion { k, c, seed, .. } | EmbedOutput::LinfDimension { k, c, seed, .. }) =
        (passed, out)
    {
        for a in 1..plan.retries.max(1) as u64 {
            let req = EmbedRequest {
                mode,
                input: plan.input.to_vec(),
                ordering: plan.ordering.map(<[u8]>::to_vec),
                seed: seed.wrapping_add(a),
                k: *k,
                c: *c,
                alpha: "default".into(),
            };
            let again = run_embed(&req)?;
            let (att, r) = check(&inst, &ord, &again, &bound, dim.as_ref(), alpha.as_ref(), plan.parallel)?;
            rows = r;
            passed = att.passed;
            attempts.push(att);
            if passed {
                break;
            }
        }
    }
    Ok(AuditReport { mode, bound: bound_src, dimension_bound: dim_src, passed, attempts, per_j: rows })
}

pub fn run(args: &AuditArgs) -> Result<(), CliError> {
    let input = read_bytes(&args.input)?;
    let ordering = args.ordering.as_deref().map(read_bytes).transpose()?;
    let out: EmbedOutput = load(&args.embedding, "embedding artifact")?;
    let plan = AuditPlan {
        input: &input,
        ordering: ordering.as_deref(),
        bound: args.bound.as_deref(),
        dimension_bound: args.dimension_bound.as_deref(),
        alpha: &args.alpha,
        retries: args.retries,
        parallel: !args.serial,
    };
    let report = audit_output(&plan, &out)?;
    emit(args.out.as_deref(), &to_json(&report))?;
    if let Some(path) = &args.manifest {
        let mut m: RunManifest = load(path, "manifest")?;
        let last = report.attempts.last().expect("at least one attempt");
        m.audits.push(AuditVerdict {
            bound: report.bound.clone(),
            dimension_bound: report.dimension_bound.clone(),
            passed: report.passed,
            seed: last.seed,
            attempts: report.attempts.len(),
        });
        emit(Some(path), &m.to_bytes())?;
    }
    if report.passed {
        return Ok(());
    }
    let v = &report.attempts.last().expect("attempt").violations[0];
    Err(CliError::violated(format!(
        "{} bound violated at j = {} (point {}, witness {}): {} > {}",
        v.kind, v.j, v.point, v.witness, v.achieved, v.allowed
    )))
}
