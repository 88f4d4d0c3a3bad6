//! Run manifests: the frozen record of what a run did, precise enough to
//! reproduce it bit-for-bit.
//!
//! A manifest stores the resolved [`RunConfig`] (seed included), the
//! version of this tool, a digest of the input file, per-stage wall-clock
//! timings, and the name + digest of every output file. `segment
//! --from-manifest` and `refine --manifest` consume these.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

/// File name every command writes its manifest under, inside `--out-dir`.
pub const MANIFEST_NAME: &str = "manifest.json";

/// One produced file: its name within the output directory and its digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    /// File name relative to the run's output directory.
    pub name: String,
    /// SHA-256 of the file contents, lowercase hex.
    pub sha256: String,
}

/// The complete record of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Always `"rfmseg"`.
    pub tool: String,
    /// Version of the binary that wrote this manifest. Re-runs demand an
    /// exact match: bit-identical output is only promised per version.
    pub version: String,
    /// The subcommand the user invoked (`segment`, `refine`, ...).
    pub invoked: String,
    /// The fully resolved configuration, sufficient to re-run.
    pub config: RunConfig,
    /// SHA-256 of the input file at run time.
    pub input_sha256: String,
    /// Wall-clock milliseconds per pipeline stage.
    pub timings_ms: BTreeMap<String, u64>,
    /// Every output file the run wrote, with digests.
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    /// Reads and parses a manifest file.
    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        let manifest: RunManifest = serde_json::from_str(&text)
            .with_context(|| format!("parsing manifest {}", path.display()))?;
        if manifest.tool != "rfmseg" {
            anyhow::bail!(
                "{} is a manifest for {:?}, not rfmseg",
                path.display(),
                manifest.tool
            );
        }
        Ok(manifest)
    }

    /// Pretty-prints the manifest into `dir/manifest.json`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_NAME);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    /// Digest recorded for a named output, if the run produced it.
    pub fn output_sha256(&self, name: &str) -> Option<&str> {
        self.outputs
            .iter()
            .find(|o| o.name == name)
            .map(|o| o.sha256.as_str())
    }
}

/// SHA-256 of a byte buffer, lowercase hex.
pub fn sha256_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

/// SHA-256 of a file's contents, lowercase hex.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).with_context(|| format!("reading {} for digest", path.display()))?;
    Ok(sha256_bytes(&bytes))
}

/// Accumulates named wall-clock timings for the manifest.
#[derive(Debug, Default)]
pub struct Timings {
    stages: BTreeMap<String, u64>,
}

impl Timings {
    /// Runs `work`, recording its duration under `stage`. Repeated stages
    /// accumulate.
    pub fn time<T>(&mut self, stage: &str, work: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = work();
        let elapsed = u64::try_from(start.elapsed().as_millis()).unwrap_or(u64::MAX);
        *self.stages.entry(stage.to_string()).or_insert(0) += elapsed;
        out
    }

    /// Consumes the accumulator for the manifest.
    pub fn into_map(self) -> BTreeMap<String, u64> {
        self.stages
    }
}
