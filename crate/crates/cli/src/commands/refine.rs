//! `rfmseg refine` — split one segment of a previous segmentation run.
//!
//! Takes the manifest of a `segment` (or earlier `refine`) run, re-derives
//! its segments in memory, re-clusters the chosen segment, and writes a
//! fresh set of segment files. The new manifest embeds the whole composed
//! job, so refined runs re-run from their manifests like any other.
//!
//! The seed comes from the base manifest, and the refinement stage derives
//! its own sub-seed from it — refining a model-1 run that stopped at its
//! base stage (`--k2 1`) with k-means k=2 reproduces, byte for byte, the
//! segment and scatter files of a direct `--k2 2` run.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use rfmseg_core::clustering::agglomerative::Linkage;

use crate::config::{
    usage, Action, RefineSpec, RunConfig, SegmentJob, DEFAULT_EPS, DEFAULT_LINKAGE,
    DEFAULT_MIN_POINTS, DEFAULT_N_CLUSTERS, DEFAULT_OUT_DIR, DEFAULT_REFINE_K,
};
use crate::manifest::RunManifest;

use super::{execute_segment, verify_manifest_compatibility};

/// Re-cluster one segment of a previous run.
#[derive(Debug, Args)]
pub struct RefineArgs {
    /// Manifest of the segmentation run to refine
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,

    /// Directory for the refined output files [default: rfmseg-out]
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Segment id to split; omitted = the segment with the widest
    /// recency spread
    #[arg(long, value_name = "ID")]
    segment: Option<usize>,

    /// Sub-clustering to apply: kmeans, dbscan or agglomerative
    /// [default: kmeans]
    #[arg(long, value_name = "METHOD")]
    method: Option<String>,

    /// kmeans: sub-segment count [default: 2]
    #[arg(long, value_name = "K")]
    k: Option<usize>,

    /// dbscan: neighbourhood radius in standardized units [default: 0.5]
    #[arg(long, value_name = "EPS")]
    eps: Option<f64>,

    /// dbscan: neighbours (self included) that make a point core
    /// [default: 5]
    #[arg(long, value_name = "N")]
    min_points: Option<usize>,

    /// agglomerative: sub-segment count [default: 4]
    #[arg(long, value_name = "N")]
    n_clusters: Option<usize>,

    /// agglomerative: linkage rule (single, complete, average, ward)
    /// [default: ward]
    #[arg(long, value_name = "RULE")]
    linkage: Option<String>,
}

/// Builds the [`RefineSpec`] from the method flag and its parameters,
/// rejecting parameters that belong to a different method.
fn build_spec(args: &RefineArgs) -> Result<RefineSpec> {
    let method = args.method.as_deref().unwrap_or("kmeans");
    let kmeans_flags = args.k.is_some();
    let dbscan_flags = args.eps.is_some() || args.min_points.is_some();
    let agglomerative_flags = args.n_clusters.is_some() || args.linkage.is_some();

    let (spec, foreign) = match method {
        "kmeans" => (
            RefineSpec::Kmeans {
                k: args.k.unwrap_or(DEFAULT_REFINE_K),
            },
            dbscan_flags || agglomerative_flags,
        ),
        "dbscan" => (
            RefineSpec::Dbscan {
                eps: args.eps.unwrap_or(DEFAULT_EPS),
                min_points: args.min_points.unwrap_or(DEFAULT_MIN_POINTS),
            },
            kmeans_flags || agglomerative_flags,
        ),
        "agglomerative" => {
            let linkage = match args.linkage.as_deref() {
                Some(text) => text.parse::<Linkage>().map_err(anyhow::Error::new)?,
                None => DEFAULT_LINKAGE,
            };
            (
                RefineSpec::Agglomerative {
                    n_clusters: args.n_clusters.unwrap_or(DEFAULT_N_CLUSTERS),
                    linkage,
                },
                kmeans_flags || dbscan_flags,
            )
        }
        other => {
            return Err(usage(format!(
                "--method must be kmeans, dbscan or agglomerative, got {other:?}"
            )))
        }
    };
    if foreign {
        return Err(usage(format!(
            "flags for another method were given alongside --method {method} \
             (kmeans: --k; dbscan: --eps/--min-points; agglomerative: --n-clusters/--linkage)"
        )));
    }
    Ok(spec)
}

/// Loads the base manifest, wraps its job in a refinement step, and runs
/// the composed job end to end.
pub fn run(args: RefineArgs) -> Result<()> {
    let recorded = RunManifest::load(&args.manifest)?;
    let Action::Segment { job: base } = recorded.config.action.clone() else {
        return Err(usage(format!(
            "{} records a {:?} run; only segmentation runs can be refined",
            args.manifest.display(),
            recorded.invoked
        )));
    };
    verify_manifest_compatibility(&recorded)?;

    let spec = build_spec(&args)?;
    let config = RunConfig {
        action: Action::Segment {
            job: SegmentJob::Refine {
                base: Box::new(base),
                segment: args.segment,
                method: spec,
            },
        },
        ..recorded.config
    };

    let out_dir = args
        .out_dir
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    execute_segment(&config, &out_dir, "refine")?;
    Ok(())
}
