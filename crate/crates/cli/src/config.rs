//! Run configuration: defaults, config-file overlay, and the resolved
//! snapshot that gets frozen into run manifests.
//!
//! Every parameter follows the same precedence: command-line flag, then
//! config-file key (same name as the flag), then the documented default.
//! The resolved [`RunConfig`] is what executes and what the manifest
//! records — re-running a manifest never re-reads flags or config files.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use rfmseg_core::clustering::agglomerative::Linkage;
use rfmseg_core::ingest::Schema;

pub const DEFAULT_OUT_DIR: &str = "rfmseg-out";
pub const DEFAULT_QUANTILES: u32 = 5;
pub const DEFAULT_K_MIN: usize = 1;
pub const DEFAULT_K_MAX: usize = 10;
pub const DEFAULT_RESTARTS: usize = 5;
pub const DEFAULT_EPS_GRID: &str = "0.25,0.5,0.75,1.0,1.5,2.0";
pub const DEFAULT_MIN_POINTS_GRID: &str = "3,5,10,20";
pub const DEFAULT_MODEL: u8 = 1;
pub const DEFAULT_K1: usize = 4;
pub const DEFAULT_K2: usize = 2;
pub const DEFAULT_EPS: f64 = 0.5;
pub const DEFAULT_MIN_POINTS: usize = 5;
pub const DEFAULT_K_OUTLIERS: usize = 2;
pub const DEFAULT_N_CLUSTERS: usize = 4;
pub const DEFAULT_LINKAGE: Linkage = Linkage::Ward;
pub const DEFAULT_REFINE_K: usize = 2;

/// The fully resolved input of one run. Serialized verbatim into the
/// manifest; deserializing it back and re-running reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Transaction CSV path.
    pub input: PathBuf,
    /// Column mapping for the input file.
    pub schema: Schema,
    /// Keep rows with negative amounts (refunds) instead of rejecting them.
    pub allow_negative: bool,
    /// RNG seed. Always present for randomized actions (drawn from entropy
    /// and recorded when the user gave none); absent for deterministic ones.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// What to do with the data.
    pub action: Action,
}

/// The work a run performs, with all parameters pinned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Action {
    /// Compute the per-customer feature table (raw + standardized).
    Rfm,
    /// Quantile-score every customer on each feature axis.
    Score {
        /// Bins per axis, 1..=9.
        quantiles: u32,
    },
    /// Scan k over a range and report the scatter curve plus a knee hint.
    Elbow {
        /// Smallest k.
        k_min: usize,
        /// Largest k.
        k_max: usize,
        /// Seeded attempts per k.
        restarts: usize,
    },
    /// Grid-scan density parameters.
    Sweep {
        /// Radii to try.
        eps_grid: Vec<f64>,
        /// Core thresholds to try.
        min_points_grid: Vec<usize>,
    },
    /// Produce customer segments.
    Segment {
        /// The (possibly composed) clustering to run.
        job: SegmentJob,
    },
}

/// A segment-producing computation. `Refine` nests another job, so a
/// refined run's manifest still describes the whole composition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentJob {
    /// k-means, then re-split one segment with a second k-means.
    Model1 {
        /// Base segment count.
        k1: usize,
        /// Sub-segments for the refined segment (1 = no refinement).
        k2: usize,
        /// Segment to refine; `None` picks the one with the widest
        /// recency spread.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        refine_target: Option<usize>,
    },
    /// Density clustering, then k-means over the noise points.
    Model2 {
        /// Neighbourhood radius (standardized units).
        eps: f64,
        /// Neighbour count (self included) that makes a point core.
        min_points: usize,
        /// Outlier segments to carve from the noise.
        k_outliers: usize,
    },
    /// Hierarchical clustering cut at a fixed segment count.
    Model3 {
        /// Segments to cut the tree into.
        n_clusters: usize,
        /// Cluster distance rule.
        linkage: Linkage,
        /// Refuse inputs larger than this many customers.
        size_cap: usize,
    },
    /// Re-cluster one segment of a base job's output.
    Refine {
        /// The job whose output is being refined.
        base: Box<SegmentJob>,
        /// Segment to split; `None` picks the widest recency spread.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        segment: Option<usize>,
        /// Sub-clustering to apply.
        method: RefineSpec,
    },
}

/// The sub-clustering of a refine step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum RefineSpec {
    /// k-means with this k.
    Kmeans {
        /// Sub-cluster count.
        k: usize,
    },
    /// Density scan; noise becomes its own sub-segment.
    Dbscan {
        /// Neighbourhood radius.
        eps: f64,
        /// Core threshold.
        min_points: usize,
    },
    /// Hierarchical with this cut.
    Agglomerative {
        /// Sub-cluster count.
        n_clusters: usize,
        /// Cluster distance rule.
        linkage: Linkage,
    },
}

/// Every key a config file may contain. Keys are exactly the long flag
/// names; a file may hold keys for several commands, and each command reads
/// only the keys it understands.
const KNOWN_KEYS: &[&str] = &[
    "input",
    "out-dir",
    "schema",
    "seed",
    "allow-negative",
    "quantiles",
    "k-min",
    "k-max",
    "restarts",
    "eps",
    "min-points",
    "model",
    "k1",
    "k2",
    "refine-target",
    "k-outliers",
    "n-clusters",
    "linkage",
    "agglomerative-cap",
];

/// A parsed `key=value` config file.
#[derive(Debug, Default)]
pub struct FileConfig {
    values: BTreeMap<String, String>,
}

impl FileConfig {
    /// Loads and validates a config file: one `key=value` per line, `#` or
    /// `;` comments, blank lines ignored. Unknown keys and repeated keys
    /// are errors — both are almost always typos.
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(usage(format!(
                    "{}:{}: expected key=value, got {:?}",
                    path.display(),
                    lineno + 1,
                    line
                )));
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(usage(format!(
                    "{}:{}: unknown config key {:?} (known keys: {})",
                    path.display(),
                    lineno + 1,
                    key,
                    KNOWN_KEYS.join(", ")
                )));
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(usage(format!(
                    "{}:{}: key {:?} set twice",
                    path.display(),
                    lineno + 1,
                    key
                )));
            }
        }
        Ok(FileConfig { values })
    }

    /// Raw string lookup.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }
}

/// Flag-then-file-then-default resolution for one command invocation.
pub struct Resolver {
    file: FileConfig,
}

impl Resolver {
    /// Builds a resolver over an optional `--config` file.
    pub fn new(config_path: Option<&Path>) -> Result<Resolver> {
        let file = match config_path {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        Ok(Resolver { file })
    }

    /// Flag value, else file value parsed as `T`, else `None`.
    pub fn opt<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(text) => {
                let value = text.parse::<T>().map_err(|e| {
                    // A bad config value is the same user mistake as a bad
                    // flag value, so it gets the same usage classification.
                    // Typed parse errors may already carry the usage prefix;
                    // drop it rather than print it twice.
                    let inner = e.to_string();
                    let inner = inner.strip_prefix("invalid parameter: ").unwrap_or(&inner).to_owned();
                    usage(format!("config key {key}={text:?}: {inner}"))
                })?;
                Ok(Some(value))
            }
            None => Ok(None),
        }
    }

    /// Flag value, else file value, else `default`.
    pub fn value<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    /// The input path is the one parameter with no default.
    pub fn input(&self, flag: Option<PathBuf>) -> Result<PathBuf> {
        self.opt(flag, "input")?
            .ok_or_else(|| usage("--input is required (flag or config file)"))
    }

    /// Output directory with its documented default.
    pub fn out_dir(&self, flag: Option<PathBuf>) -> Result<PathBuf> {
        self.value(flag, "out-dir", PathBuf::from(DEFAULT_OUT_DIR))
    }

    /// Column mapping: packed overrides applied on top of the defaults.
    pub fn schema(&self, flag: Option<&str>) -> Result<Schema> {
        match flag.or_else(|| self.file.get("schema")) {
            Some(spec) => parse_schema_spec(spec),
            None => Ok(Schema::default()),
        }
    }
}

/// Wraps a message as a usage error so `main` maps it to exit code 2.
pub fn usage(message: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(rfmseg_core::Error::InvalidParam(message.into()))
}

/// Parses `holder=...,id=...,amount=...,date=...`. Parts may come in any
/// order and any subset; unnamed fields keep their defaults.
pub fn parse_schema_spec(spec: &str) -> Result<Schema> {
    let mut schema = Schema::default();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let Some((field, column)) = part.split_once('=') else {
            return Err(usage(format!(
                "schema part {part:?} is not field=column (fields: holder, id, amount, date)"
            )));
        };
        let column = column.trim().to_string();
        if column.is_empty() {
            return Err(usage(format!("schema part {part:?} names an empty column")));
        }
        match field.trim() {
            "holder" => schema.holder = column,
            "id" => schema.id = column,
            "amount" => schema.amount = column,
            "date" => schema.date = column,
            other => {
                return Err(usage(format!(
                    "unknown schema field {other:?} (expected holder, id, amount or date)"
                )))
            }
        }
    }
    Ok(schema)
}

/// Parses a comma-separated list, e.g. an eps grid `0.25,0.5,1.0`.
pub fn parse_list<T>(text: &str, what: &str) -> Result<Vec<T>>
where
    T: FromStr,
    T::Err: Display,
{
    let mut out = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        out.push(
            part.parse::<T>()
                .map_err(|e| usage(format!("bad {what} value {part:?}: {e}")))?,
        );
    }
    if out.is_empty() {
        return Err(usage(format!("{what} list is empty")));
    }
    Ok(out)
}

/// Parses `--refine-target`: `auto` (pick by rule) or a segment id.
pub fn parse_refine_target(text: &str) -> Result<Option<usize>> {
    if text.eq_ignore_ascii_case("auto") {
        return Ok(None);
    }
    text.parse::<usize>().map(Some).map_err(|_| {
        usage(format!(
            "refine target must be 'auto' or a segment id, got {text:?}"
        ))
    })
}
