use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use prioembed::generate::{random_metric, random_ordering, GraphShape};
use prioembed::{Embedding, MetricSpace, Scalar, WeightedGraph, WeightedTree};
use prioembed_cli::artifact::{to_json, EmbedOutput};
use prioembed_cli::audit::{audit_output, AuditPlan};
use prioembed_cli::manifest::RunManifest;

struct Dir(PathBuf);

impl Dir {
    fn new(tag: &str) -> Dir {
        let p = std::env::temp_dir().join(format!("prioembed-cli-{tag}-{}", std::process::id()));
        std::fs::create_dir_all(&p).unwrap();
        Dir(p)
    }

    fn path(&self, name: &str) -> String {
        self.0.join(name).to_string_lossy().into_owned()
    }

    fn write(&self, name: &str, bytes: &[u8]) -> String {
        std::fs::write(self.0.join(name), bytes).unwrap();
        self.path(name)
    }
}

impl Drop for Dir {
    fn drop(&mut self) {
        std::fs::remove_dir_all(&self.0).ok();
    }
}

fn prioembed(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prioembed")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn gen_metric_single_point() {
    let out = prioembed(&["gen", "metric", "--n", "1"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["dist"], serde_json::json!([["0"]]));
}

#[test]
fn gen_tree_two_vertices_is_one_edge() {
    let out = prioembed(&["gen", "tree", "--n", "2", "--seed", "4"]);
    assert_eq!(code(&out), 0);
    let t: WeightedTree = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(t.len(), 2);
    assert_eq!(t.edges().len(), 1);
}

#[test]
fn gen_graph_is_deterministic() {
    let a = prioembed(&["gen", "graph", "--n", "50", "--seed", "7"]);
    let b = prioembed(&["gen", "graph", "--n", "50", "--seed", "7"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let g: WeightedGraph = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(g.len(), 50);
}

#[test]
fn gen_rejects_empty_instances() {
    for kind in ["metric", "graph", "tree", "ordering"] {
        assert_eq!(code(&prioembed(&["gen", kind, "--n", "0"])), 2, "{kind}");
    }
}

#[test]
fn embed_two_vertex_tree() {
    let dir = Dir::new("tree2");
    let input = dir.write("t.json", br#"{"n_real":2,"vertices":[{"id":0,"steiner":false},{"id":1,"steiner":false}],"edges":[[0,1,"5/2"]]}"#);
    let out = prioembed(&["embed", "tree", "--input", &input]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let parsed: EmbedOutput = serde_json::from_slice(&out.stdout).unwrap();
    let f = parsed.embedding().unwrap();
    assert!(f.dim() <= 1);
    assert_eq!(f.distance(0, 1), Scalar::new(5, 2));
}

#[test]
fn embed_ultrametric_two_points() {
    let dir = Dir::new("um2");
    let input = dir.write("m.json", br#"{"n":2,"dist":[["0","7/3"],["7/3","0"]]}"#);
    let out = prioembed(&["embed", "ultrametric", "--input", &input]);
    assert_eq!(code(&out), 0);
    let EmbedOutput::Ultrametric { tree, .. } = serde_json::from_slice(&out.stdout).unwrap() else {
        panic!("wrong mode");
    };
    assert_eq!(tree.nodes()[0].label, Scalar::new(7, 3));
    assert_eq!(*tree.distance(0, 1), Scalar::new(7, 3));
}

#[test]
fn embed_writes_reproducible_manifest() {
    let dir = Dir::new("manifest");
    let m = random_metric(64, &GraphShape::default(), 3).unwrap();
    let input = dir.write("m.json", &to_json(&m));
    let out = dir.path("f.json");
    let args = ["embed", "linf-distortion", "--input", &input, "--k", "2", "--seed", "1", "--out", &out];
    assert_eq!(code(&prioembed(&args)), 0);
    let first = std::fs::read(&out).unwrap();
    let manifest = dir.path("f.json.manifest.json");
    let v = prioembed(&["validate", "manifest", &manifest]);
    assert_eq!(code(&v), 0, "{}", String::from_utf8_lossy(&v.stderr));
    assert_eq!(std::fs::read(&out).unwrap(), first);

    let parsed: RunManifest = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
    assert_eq!(parsed.seed, 1);
    assert_eq!(parsed.k, 2);

    // a changed input no longer matches its digest
    dir.write("m.json", &to_json(&random_metric(64, &GraphShape::default(), 4).unwrap()));
    assert_eq!(code(&prioembed(&["validate", "manifest", &manifest])), 2);
}

#[test]
fn audit_appends_verdict_to_manifest() {
    let dir = Dir::new("verdict");
    let input = dir.write("m.json", &to_json(&random_metric(30, &GraphShape::default(), 5).unwrap()));
    let ord = dir.write("o.json", &to_json(&random_ordering(30, 6)));
    let out = dir.path("u.json");
    assert_eq!(code(&prioembed(&["embed", "ultrametric", "--input", &input, "--ordering", &ord, "--out", &out])), 0);
    let manifest = dir.path("u.json.manifest.json");
    let a = prioembed(&["audit", "--input", &input, "--ordering", &ord, "--embedding", &out, "--manifest", &manifest]);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(stdout_json(&a)["passed"], true);
    let parsed: RunManifest = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
    assert_eq!(parsed.audits.len(), 1);
    assert!(parsed.audits[0].passed);
    assert_eq!(parsed.audits[0].bound, "2*alpha(j)");
}

fn row_map(m: &MetricSpace) -> Embedding {
    Embedding::new(m.len(), m.rows()).unwrap()
}

fn linf_artifact(f: Embedding) -> EmbedOutput {
    EmbedOutput::LinfDistortion { k: 2, c: 16, seed: 0, embedding: f, coordinates: Vec::new() }
}

#[test]
fn row_map_is_an_isometry() {
    let dir = Dir::new("rowmap");
    let m = random_metric(25, &GraphShape::default(), 11).unwrap();
    let input = dir.write("m.json", &to_json(&m));
    let emb = dir.write("f.json", &to_json(&linf_artifact(row_map(&m))));
    let out = prioembed(&["audit", "--input", &input, "--embedding", &emb, "--bound", "1", "--retries", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn contracted_embedding_fails_with_witness() {
    let dir = Dir::new("contract");
    let m = random_metric(20, &GraphShape::default(), 12).unwrap();
    let input = dir.write("m.json", &to_json(&m));
    let halved: Vec<Vec<Scalar>> = m.rows().iter().map(|r| r.iter().map(|v| v.half()).collect()).collect();
    let emb = dir.write("f.json", &to_json(&linf_artifact(Embedding::new(20, halved).unwrap())));
    let out = prioembed(&["audit", "--input", &input, "--embedding", &emb, "--bound", "3/2", "--retries", "1"]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("contraction") && err.contains("witness"), "{err}");
    assert_eq!(stdout_json(&out)["passed"], false);
}

#[test]
fn zero_embedding_has_zero_prioritized_dimension() {
    let m = random_metric(10, &GraphShape::default(), 13).unwrap();
    let input = to_json(&m);
    let zero = linf_artifact(Embedding::zeros(10, 4));
    let plan = AuditPlan {
        input: &input,
        ordering: None,
        bound: Some("1"),
        dimension_bound: Some("0"),
        alpha: "default",
        retries: 1,
        parallel: false,
    };
    let report = audit_output(&plan, &zero).unwrap();
    assert!(report.per_j.iter().all(|r| r.beta == Some(0)));
    let last = report.attempts.last().unwrap();
    assert!(last.violations.iter().all(|v| v.kind != "dimension"));
    assert!(!report.passed);
}

#[test]
fn invalid_inputs_exit_2() {
    let dir = Dir::new("invalid");
    let tree = dir.write("t.json", br#"{"n_real":2,"vertices":[{"id":0,"steiner":false},{"id":1,"steiner":false}],"edges":[[0,1,"1"]]}"#);
    assert_eq!(code(&prioembed(&["validate", "metric", &tree])), 2);
    let broken = dir.write("bad.json", b"{not json");
    assert_eq!(code(&prioembed(&["embed", "tree", "--input", &broken])), 2);
    let asym = dir.write("m.json", br#"{"n":2,"dist":[["0","1"],["2","0"]]}"#);
    assert_eq!(code(&prioembed(&["embed", "ultrametric", "--input", &asym])), 2);
    let m = dir.write("ok.json", br#"{"n":2,"dist":[["0","1"],["1","0"]]}"#);
    assert_eq!(code(&prioembed(&["embed", "ultrametric", "--input", &m, "--alpha", "j"])), 2);
    assert_eq!(code(&prioembed(&["embed", "ultrametric", "--input", &m, "--alpha", "2*("])), 2);
    let short = dir.write("o.json", br#"{"perm":[0]}"#);
    assert_eq!(code(&prioembed(&["embed", "ultrametric", "--input", &m, "--ordering", &short])), 2);
    assert_eq!(code(&prioembed(&["embed", "tree", "--input", &dir.path("missing.json")])), 2);
    assert_eq!(code(&prioembed(&["frobnicate"])), 2);
}

#[test]
fn validate_round_trips_artifacts() {
    let dir = Dir::new("roundtrip");
    for (kind, n) in [("metric", 12), ("graph", 12), ("tree", 12), ("ordering", 12)] {
        let file = dir.path(&format!("{kind}.json"));
        assert_eq!(code(&prioembed(&["gen", kind, "--n", &n.to_string(), "--seed", "2", "--out", &file])), 0);
        let out = prioembed(&["validate", kind, &file]);
        assert_eq!(code(&out), 0, "{kind}");
        assert_eq!(stdout_json(&out)["valid"], true);
    }
    for mode in ["tree", "linf-distortion", "linf-dimension", "ultrametric", "spanning-tree"] {
        let input = match mode {
            "tree" => dir.path("tree.json"),
            "spanning-tree" => dir.path("graph.json"),
            _ => dir.path("metric.json"),
        };
        let out = dir.path(&format!("{mode}.out.json"));
        assert_eq!(code(&prioembed(&["embed", mode, "--input", &input, "--out", &out])), 0, "{mode}");
        let bytes = std::fs::read(&out).unwrap();
        let parsed: EmbedOutput = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(to_json(&parsed), bytes, "{mode}");
        let v = prioembed(&["validate", "embedding", &out]);
        assert_eq!(stdout_json(&v)["mode"], mode);
    }
}

#[test]
fn rational_and_decimal_scalars_parse() {
    let dir = Dir::new("scalars");
    let input = dir.write("m.json", br#"{"n":3,"dist":[["0","0.5",1],["1/2","0","1.5"],[1,"3/2","0"]]}"#);
    let out = prioembed(&["validate", "metric", &input]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(Path::new(&input).exists());
}
