//! JSON artifacts written and read by the commands.

use std::fmt;
use std::path::Path;

use clap::ValueEnum;
use prioembed::frechet::CoordinateInfo;
use prioembed::{Embedding, SpanningTree, UltrametricTree};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Tree,
    LinfDistortion,
    LinfDimension,
    Ultrametric,
    SpanningTree,
}

impl Mode {
    pub fn randomized(self) -> bool {
        matches!(self, Mode::LinfDistortion | Mode::LinfDimension)
    }

    /// What the input file must contain.
    pub fn input_kind(self) -> &'static str {
        match self {
            Mode::Tree => "tree",
            Mode::SpanningTree => "graph",
            _ => "metric",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.to_possible_value().expect("no skipped variants");
        f.write_str(v.get_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelInfo {
    pub first: usize,
    pub last: usize,
    pub dim: usize,
}

/// Output of `embed`, tagged by mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum EmbedOutput {
    Tree {
        embedding: Embedding,
        levels: Vec<LevelInfo>,
    },
    LinfDistortion {
        k: u32,
        c: u32,
        seed: u64,
        embedding: Embedding,
        coordinates: Vec<CoordinateInfo>,
    },
    LinfDimension {
        k: u32,
        c: u32,
        seed: u64,
        embedding: Embedding,
        coordinates: Vec<CoordinateInfo>,
    },
    Ultrametric {
        alpha: String,
        tree: UltrametricTree,
    },
    SpanningTree {
        alpha: String,
        tree: SpanningTree,
    },
}

impl EmbedOutput {
    pub fn mode(&self) -> Mode {
        match self {
            EmbedOutput::Tree { .. } => Mode::Tree,
            EmbedOutput::LinfDistortion { .. } => Mode::LinfDistortion,
            EmbedOutput::LinfDimension { .. } => Mode::LinfDimension,
            EmbedOutput::Ultrametric { .. } => Mode::Ultrametric,
            EmbedOutput::SpanningTree { .. } => Mode::SpanningTree,
        }
    }

    pub fn embedding(&self) -> Option<&Embedding> {
        match self {
            EmbedOutput::Tree { embedding, .. }
            | EmbedOutput::LinfDistortion { embedding, .. }
            | EmbedOutput::LinfDimension { embedding, .. } => Some(embedding),
            _ => None,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec(value).expect("artifacts serialize");
    out.push(b'\n');
    out
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::invalid(format!("cannot read {}: {e}", path.display())))
}

pub fn parse<T: DeserializeOwned>(bytes: &[u8], what: &str) -> Result<T, CliError> {
    serde_json::from_slice(bytes).map_err(|e| CliError::invalid(format!("invalid {what}: {e}")))
}

pub fn load<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T, CliError> {
    parse(&read_bytes(path)?, what)
}

/// Writes to `path`, or to stdout when absent.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::invalid(format!("cannot write {}: {e}", p.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(bytes)
                .map_err(|e| CliError::invalid(format!("cannot write to stdout: {e}")))
        }
    }
}
