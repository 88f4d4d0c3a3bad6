//! Shared machinery for the subcommands: flag structs, the ingest → RFM →
//! standardize data pipeline, segment-job execution, and output writing.

pub mod elbow;
pub mod refine;
pub mod rfm;
pub mod score;
pub mod segment;
pub mod sweep;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::Serialize;

use rfmseg_core::clustering::agglomerative::MergeTree;
use rfmseg_core::clustering::dbscan::DbscanParams;
use rfmseg_core::clustering::kmeans::KMeansOptions;
use rfmseg_core::clustering::PointSet;
use rfmseg_core::ingest::{
    dedupe, parse_transactions, IngestReport, ParseOptions, Schema,
};
use rfmseg_core::pipelines::{
    label_segments, refine as refine_segment, resolve_refine_target, run_model1, run_model2,
    run_model3, stage_seed, RefineMethod, RefineTarget, SegmentLabel, SegmentSet,
};
use rfmseg_core::rfm::{
    compute_reference_date, compute_rfm, rfm_to_matrix, standardize, RfmVector,
    StandardizationParams,
};

use crate::config::{usage, RefineSpec, Resolver, RunConfig, SegmentJob};
use crate::manifest::{sha256_bytes, OutputFile, RunManifest, Timings, MANIFEST_NAME};

/// Flags shared by every data-reading subcommand.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Transaction CSV file to read
    #[arg(long, value_name = "FILE")]
    pub input: Option<PathBuf>,

    /// Directory for output files, created if missing [default: rfmseg-out]
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,

    /// Column mapping overrides, e.g. holder=card_holder,id=transaction_id,amount=amount,date=op_date
    #[arg(long, value_name = "SPEC")]
    pub schema: Option<String>,

    /// Config file of key=value lines named after the flags; flags win
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Keep rows with negative amounts (refunds) instead of rejecting them
    #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    pub allow_negative: Option<bool>,
}

/// The resolved common parameters for one run.
pub struct CommonConfig {
    /// Input CSV path.
    pub input: PathBuf,
    /// Output directory.
    pub out_dir: PathBuf,
    /// Column mapping.
    pub schema: Schema,
    /// Keep negative amounts.
    pub allow_negative: bool,
}

/// Applies flag > config file > default precedence to the common flags.
pub fn resolve_common(args: &CommonArgs) -> Result<(CommonConfig, Resolver)> {
    let resolver = Resolver::new(args.config.as_deref())?;
    let common = CommonConfig {
        input: resolver.input(args.input.clone())?,
        out_dir: resolver.out_dir(args.out_dir.clone())?,
        schema: resolver.schema(args.schema.as_deref())?,
        allow_negative: resolver.value(args.allow_negative, "allow-negative", false)?,
    };
    Ok((common, resolver))
}

/// Everything the clustering commands need from the input file.
pub struct PreparedData {
    /// Row accounting from ingest.
    pub report: IngestReport,
    /// Per-customer features in raw units, sorted by customer id.
    pub vectors: Vec<RfmVector>,
    /// Standardization parameters (for the sidecar).
    pub z_params: StandardizationParams,
    /// Standardized feature points, aligned 1:1 with `vectors`.
    pub points: PointSet,
}

/// Reads the input file, parses and deduplicates it, and computes the
/// per-customer feature vectors. Returns the input digest alongside.
pub fn load_features(
    config: &RunConfig,
    timings: &mut Timings,
) -> Result<(Vec<RfmVector>, IngestReport, String)> {
    let bytes = timings
        .time("read", || std::fs::read(&config.input))
        .with_context(|| format!("reading {}", config.input.display()))?;
    let digest = sha256_bytes(&bytes);

    let parsed = timings.time("parse", || -> Result<_> {
        let options = ParseOptions {
            allow_negative: config.allow_negative,
        };
        let (transactions, mut report) =
            parse_transactions(bytes.as_slice(), &config.schema, &options)?;
        let (transactions, dropped) = dedupe(transactions);
        report.note_duplicates(dropped);
        Ok((transactions, report))
    });
    let (transactions, report) = parsed?;

    let vectors = timings.time("rfm", || -> Result<_> {
        let reference = compute_reference_date(&transactions)?;
        Ok(compute_rfm(&transactions, reference)?)
    })?;
    Ok((vectors, report, digest))
}

/// [`load_features`] plus standardization into a clusterable point set.
pub fn prepare(config: &RunConfig, timings: &mut Timings) -> Result<(PreparedData, String)> {
    let (vectors, report, digest) = load_features(config, timings)?;
    let (z_params, points) = timings.time("standardize", || -> Result<_> {
        let matrix = rfm_to_matrix(&vectors)?;
        let (z, z_params) = standardize(&matrix)?;
        let points = PointSet::from_matrix(&z)?;
        Ok((z_params, points))
    })?;
    Ok((
        PreparedData {
            report,
            vectors,
            z_params,
            points,
        },
        digest,
    ))
}

/// One line of ingest accounting for standard output.
pub fn print_ingest_summary(report: &IngestReport, customers: usize) {
    println!(
        "rows read: {} (kept {}, duplicates {}, rejected {}); customers: {}",
        report.rows_read, report.rows_kept, report.duplicates_dropped, report.rows_rejected,
        customers
    );
}

/// Runs a (possibly nested) segment job over standardized points.
///
/// The merge tree is returned only for a plain hierarchical run — once a
/// result is refined further, the base tree no longer describes it.
pub fn run_job(
    job: &SegmentJob,
    points: &PointSet,
    seed: u64,
) -> Result<(SegmentSet, Option<MergeTree>)> {
    let options = KMeansOptions::default();
    match job {
        SegmentJob::Model1 {
            k1,
            k2,
            refine_target,
        } => {
            let target = target_of(*refine_target);
            let set = run_model1(points, *k1, *k2, target, seed, &options)?;
            Ok((set, None))
        }
        SegmentJob::Model2 {
            eps,
            min_points,
            k_outliers,
        } => {
            let params = DbscanParams {
                eps: *eps,
                min_points: *min_points,
            };
            let set = run_model2(points, &params, *k_outliers, seed, &options)?;
            Ok((set, None))
        }
        SegmentJob::Model3 {
            n_clusters,
            linkage,
            size_cap,
        } => {
            let (set, tree) = run_model3(points, *n_clusters, *linkage, *size_cap)?;
            Ok((set, Some(tree)))
        }
        SegmentJob::Refine {
            base,
            segment,
            method,
        } => {
            let (set, _) = run_job(base, points, seed)?;
            let target_id = resolve_refine_target(target_of(*segment), &set, points)?;
            let method = match method {
                RefineSpec::Kmeans { k } => RefineMethod::KMeans { k: *k },
                RefineSpec::Dbscan { eps, min_points } => RefineMethod::Dbscan {
                    eps: *eps,
                    min_points: *min_points,
                },
                RefineSpec::Agglomerative {
                    n_clusters,
                    linkage,
                } => RefineMethod::Agglomerative {
                    n_clusters: *n_clusters,
                    linkage: *linkage,
                },
            };
            let refined = refine_segment(
                &set,
                points,
                target_id,
                &method,
                stage_seed(seed, &format!("refine:{target_id}")),
                &options,
            )?;
            Ok((refined, None))
        }
    }
}

fn target_of(segment: Option<usize>) -> RefineTarget {
    match segment {
        Some(id) => RefineTarget::Id(id),
        None => RefineTarget::MaxRecencySpread,
    }
}

/// Creates the output directory and records a digest for every file
/// written into it.
pub struct OutputWriter {
    dir: PathBuf,
    outputs: Vec<OutputFile>,
}

impl OutputWriter {
    /// Prepares `dir`, creating it (and parents) when missing.
    pub fn new(dir: &Path) -> Result<OutputWriter> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(OutputWriter {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    /// Writes one output file and records its digest.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
        self.outputs.push(OutputFile {
            name: name.to_string(),
            sha256: sha256_bytes(bytes),
        });
        Ok(())
    }

    /// All files written so far.
    pub fn finish(self) -> Vec<OutputFile> {
        self.outputs
    }
}

/// Assembles and saves the manifest; call last, after all outputs exist.
pub fn save_manifest(
    out_dir: &Path,
    invoked: &str,
    config: RunConfig,
    input_sha256: String,
    timings: Timings,
    outputs: Vec<OutputFile>,
) -> Result<RunManifest> {
    let manifest = RunManifest {
        tool: "rfmseg".to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        invoked: invoked.to_string(),
        config,
        input_sha256,
        timings_ms: timings.into_map(),
        outputs,
    };
    manifest.save(out_dir)?;
    println!("wrote {}", out_dir.join(MANIFEST_NAME).display());
    Ok(manifest)
}

/// Per-segment entry of the JSON sidecar: everything about the segment
/// except the raw member list (the CSV carries the full assignment).
#[derive(Debug, Serialize)]
pub struct SegmentExport {
    /// Segment id, matching `segment_id` in the CSVs.
    pub id: usize,
    /// Member count.
    pub size: usize,
    /// Centroid in standardized space.
    pub centroid_std: Vec<f64>,
    /// Centroid in raw units (recency days, transaction count, spend).
    pub centroid_raw: Option<Vec<f64>>,
    /// Clustering steps that produced the segment.
    pub provenance: Vec<String>,
    /// Population-relative description.
    pub label: Option<SegmentLabel>,
}

/// The JSON sidecar written next to `segments.csv`: parameters and seed
/// (enough to reproduce the run), plus per-segment geometry and labels.
#[derive(Debug, Serialize)]
pub struct SegmentSidecar<'a> {
    /// Input file the segments were computed from.
    pub input: &'a Path,
    /// Digest of that input at run time.
    pub input_sha256: &'a str,
    /// Column mapping used.
    pub schema: &'a Schema,
    /// Whether negative amounts were kept.
    pub allow_negative: bool,
    /// Seed the clustering ran under.
    pub seed: u64,
    /// The full (possibly composed) clustering job.
    pub job: &'a SegmentJob,
    /// Standardization applied before clustering.
    pub standardization: &'a StandardizationParams,
    /// Number of customers partitioned.
    pub n_points: usize,
    /// Per-segment geometry, provenance and labels.
    pub segments: Vec<SegmentExport>,
}

/// Runs a segment-producing config end to end: data prep, clustering,
/// labeling, and all output files including the manifest. Returns the
/// manifest for callers that verify digests.
pub fn execute_segment(config: &RunConfig, out_dir: &Path, invoked: &str) -> Result<RunManifest> {
    let crate::config::Action::Segment { job } = &config.action else {
        return Err(usage("execute_segment called with a non-segment action"));
    };
    let seed = config
        .seed
        .ok_or_else(|| usage("segment configs must carry a seed"))?;

    let mut timings = Timings::default();
    let (data, input_digest) = prepare(config, &mut timings)?;
    print_ingest_summary(&data.report, data.vectors.len());
    println!("seed: {seed}");

    let clustered = timings.time("cluster", || run_job(job, &data.points, seed));
    let (mut set, tree) = clustered?;
    timings.time("label", || label_segments(&mut set, &data.vectors))?;

    for segment in &set.segments {
        let text = segment
            .label
            .as_ref()
            .map_or("(unlabeled)", |l| l.text.as_str());
        println!(
            "segment {}: {} customers — {} [{}]",
            segment.id,
            segment.size(),
            text,
            segment.provenance.join(" > ")
        );
    }

    let mut writer = OutputWriter::new(out_dir)?;
    timings.time("write", || -> Result<()> {
        let mut csv = Vec::new();
        rfmseg_core::pipelines::write_segments_csv(&mut csv, &set, data.points.ids())?;
        writer.write("segments.csv", &csv)?;

        let mut scatter = Vec::new();
        rfmseg_core::pipelines::write_scatter_csv(&mut scatter, &set, &data.vectors)?;
        writer.write("scatter.csv", &scatter)?;

        let sidecar = SegmentSidecar {
            input: &config.input,
            input_sha256: &input_digest,
            schema: &config.schema,
            allow_negative: config.allow_negative,
            seed,
            job,
            standardization: &data.z_params,
            n_points: set.n_points,
            segments: set
                .segments
                .iter()
                .map(|s| SegmentExport {
                    id: s.id,
                    size: s.size(),
                    centroid_std: s.centroid_std.clone(),
                    centroid_raw: s.centroid_raw.clone(),
                    provenance: s.provenance.clone(),
                    label: s.label.clone(),
                })
                .collect(),
        };
        let mut json = serde_json::to_string_pretty(&sidecar)?;
        json.push('\n');
        writer.write("segments.json", json.as_bytes())?;

        if let Some(tree) = &tree {
            let mut dendrogram = rfmseg_core::clustering::agglomerative::dendrogram_to_json(tree);
            dendrogram.push('\n');
            writer.write("dendrogram.json", dendrogram.as_bytes())?;
        }
        Ok(())
    })?;

    save_manifest(
        out_dir,
        invoked,
        config.clone(),
        input_digest,
        timings,
        writer.finish(),
    )
}

/// Checks that a manifest was written by this exact binary version and
/// that the input file still has the recorded content.
pub fn verify_manifest_compatibility(manifest: &RunManifest) -> Result<()> {
    let version = env!("CARGO_PKG_VERSION");
    if manifest.version != version {
        anyhow::bail!(
            "manifest was written by rfmseg {}, this is {} — bit-identical re-runs are only \
             guaranteed within a version",
            manifest.version,
            version
        );
    }
    let digest = crate::manifest::sha256_file(&manifest.config.input)?;
    if digest != manifest.input_sha256 {
        anyhow::bail!(
            "input file {} has changed since the manifest was written (digest {} now, {} then)",
            manifest.config.input.display(),
            digest,
            manifest.input_sha256
        );
    }
    Ok(())
}
