//! Run manifests: everything needed to reproduce an `embed` run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::artifact::{read_bytes, sha256_hex, to_json, Mode};
use crate::embed::{run_embed, EmbedRequest};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditVerdict {
    pub bound: String,
    pub dimension_bound: Option<String>,
    pub passed: bool,
    /// Seed of the passing (or last) attempt for randomized modes.
    pub seed: Option<u64>,
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub mode: Mode,
    pub input: String,
    pub input_digest: String,
    pub ordering: Option<String>,
    pub ordering_digest: Option<String>,
    pub seed: u64,
    pub k: u32,
    pub c: u32,
    pub alpha: String,
    pub output: Option<String>,
    pub output_digest: String,
    pub audits: Vec<AuditVerdict>,
}

impl RunManifest {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("manifest serializes");
        out.push(b'\n');
        out
    }

    fn checked_read(path: &str, digest: &str, what: &str) -> Result<Vec<u8>, CliError> {
        let bytes = read_bytes(Path::new(path))?;
        if sha256_hex(&bytes) != digest {
            return Err(CliError::invalid(format!("{what} {path} no longer matches the manifest digest")));
        }
        Ok(bytes)
    }

    /// Re-runs the embedding and checks the output digest (and the output
    /// file, when recorded).
    pub fn reproduce(&self) -> Result<(), CliError> {
        let input = Self::checked_read(&self.input, &self.input_digest, "input")?;
        let ordering = match (&self.ordering, &self.ordering_digest) {
            (Some(p), Some(d)) => Some(Self::checked_read(p, d, "ordering")?),
            (None, None) => None,
            _ => return Err(CliError::invalid("ordering path and digest must appear together")),
        };
        let req = EmbedRequest {
            mode: self.mode,
            input,
            ordering,
            seed: self.seed,
            k: self.k,
            c: self.c,
            alpha: self.alpha.clone(),
        };
        let digest = sha256_hex(&to_json(&run_embed(&req)?));
        if digest != self.output_digest {
            return Err(CliError::invalid(format!("rerun digest {digest} differs from {}", self.output_digest)));
        }
        if let Some(out) = &self.output {
            Self::checked_read(out, &self.output_digest, "output")?;
        }
        Ok(())
    }
}
