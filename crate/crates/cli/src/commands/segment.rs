//! `rfmseg segment` — cluster customers with one of the three models, or
//! re-run a previous segmentation bit-for-bit from its manifest.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;

use rfmseg_core::clustering::agglomerative::{Linkage, DEFAULT_SIZE_CAP};

use crate::config::{
    parse_refine_target, usage, Action, Resolver, RunConfig, SegmentJob, DEFAULT_EPS,
    DEFAULT_K1, DEFAULT_K2, DEFAULT_K_OUTLIERS, DEFAULT_LINKAGE, DEFAULT_MIN_POINTS,
    DEFAULT_MODEL, DEFAULT_N_CLUSTERS,
};
use crate::manifest::RunManifest;

use super::{execute_segment, resolve_common, verify_manifest_compatibility, CommonArgs};

/// Segment customers with one of three clustering pipelines.
#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Re-run a previous segmentation from its manifest, bit-for-bit.
    /// Only --out-dir may accompany this.
    #[arg(long, value_name = "FILE")]
    from_manifest: Option<PathBuf>,

    /// Pipeline: 1 = k-means + k-means refinement, 2 = density scan +
    /// outlier split, 3 = hierarchical [default: 1]
    #[arg(long, value_name = "N")]
    model: Option<u8>,

    /// Model 1: base segment count [default: 4]
    #[arg(long, value_name = "K")]
    k1: Option<usize>,

    /// Model 1: sub-segments for the refined segment; 1 = no refinement
    /// [default: 2]
    #[arg(long, value_name = "K")]
    k2: Option<usize>,

    /// Model 1: which segment to refine — 'auto' (widest recency spread)
    /// or a segment id [default: auto]
    #[arg(long, value_name = "TARGET")]
    refine_target: Option<String>,

    /// Model 2: neighbourhood radius in standardized units [default: 0.5]
    #[arg(long, value_name = "EPS")]
    eps: Option<f64>,

    /// Model 2: neighbours (self included) that make a point core
    /// [default: 5]
    #[arg(long, value_name = "N")]
    min_points: Option<usize>,

    /// Model 2: outlier segments to carve from the noise [default: 2]
    #[arg(long, value_name = "K")]
    k_outliers: Option<usize>,

    /// Model 3: segments to cut the tree into [default: 4]
    #[arg(long, value_name = "N")]
    n_clusters: Option<usize>,

    /// Model 3: linkage rule (single, complete, average, ward)
    /// [default: ward]
    #[arg(long, value_name = "RULE")]
    linkage: Option<String>,

    /// Model 3: refuse inputs with more customers than this
    /// [default: 20000]
    #[arg(long, value_name = "N")]
    agglomerative_cap: Option<usize>,

    /// RNG seed; drawn from entropy and recorded when omitted
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
}

/// Builds the [`SegmentJob`] for the chosen model, rejecting flags that
/// belong to a different model (a config file may still hold keys for
/// other commands; only typed flags conflict).
fn build_job(args: &SegmentArgs, resolver: &Resolver) -> Result<SegmentJob> {
    let model = resolver.value(args.model, "model", DEFAULT_MODEL)?;

    let model1_flags = args.k1.is_some() || args.k2.is_some() || args.refine_target.is_some();
    let model2_flags = args.eps.is_some() || args.min_points.is_some() || args.k_outliers.is_some();
    let model3_flags =
        args.n_clusters.is_some() || args.linkage.is_some() || args.agglomerative_cap.is_some();
    let foreign = match model {
        1 => model2_flags || model3_flags,
        2 => model1_flags || model3_flags,
        3 => model1_flags || model2_flags,
        other => {
            return Err(usage(format!(
                "--model must be 1, 2 or 3, got {other}"
            )))
        }
    };
    if foreign {
        return Err(usage(format!(
            "flags for another model were given alongside --model {model} \
             (model 1: --k1/--k2/--refine-target; model 2: --eps/--min-points/--k-outliers; \
             model 3: --n-clusters/--linkage/--agglomerative-cap)"
        )));
    }

    Ok(match model {
        1 => {
            let refine_target = match resolver.opt(args.refine_target.clone(), "refine-target")? {
                Some(text) => parse_refine_target(&text)?,
                None => None,
            };
            SegmentJob::Model1 {
                k1: resolver.value(args.k1, "k1", DEFAULT_K1)?,
                k2: resolver.value(args.k2, "k2", DEFAULT_K2)?,
                refine_target,
            }
        }
        2 => SegmentJob::Model2 {
            eps: resolver.value(args.eps, "eps", DEFAULT_EPS)?,
            min_points: resolver.value(args.min_points, "min-points", DEFAULT_MIN_POINTS)?,
            k_outliers: resolver.value(args.k_outliers, "k-outliers", DEFAULT_K_OUTLIERS)?,
        },
        _ => {
            let linkage: Linkage = resolver.value(
                args.linkage
                    .as_deref()
                    .map(str::parse::<Linkage>)
                    .transpose()
                    .map_err(anyhow::Error::new)?,
                "linkage",
                DEFAULT_LINKAGE,
            )?;
            SegmentJob::Model3 {
                n_clusters: resolver.value(args.n_clusters, "n-clusters", DEFAULT_N_CLUSTERS)?,
                linkage,
                size_cap: resolver.value(
                    args.agglomerative_cap,
                    "agglomerative-cap",
                    DEFAULT_SIZE_CAP,
                )?,
            }
        }
    })
}

/// Fresh run: writes `segments.csv`, `scatter.csv`, `segments.json`
/// (plus `dendrogram.json` for model 3) and the manifest. With
/// `--from-manifest`, re-runs that manifest instead and verifies the
/// output digests match the recorded ones.
pub fn run(args: SegmentArgs) -> Result<()> {
    if let Some(manifest_path) = &args.from_manifest {
        let model_flags = args.model.is_some()
            || args.k1.is_some()
            || args.k2.is_some()
            || args.refine_target.is_some()
            || args.eps.is_some()
            || args.min_points.is_some()
            || args.k_outliers.is_some()
            || args.n_clusters.is_some()
            || args.linkage.is_some()
            || args.agglomerative_cap.is_some()
            || args.seed.is_some()
            || args.common.input.is_some()
            || args.common.schema.is_some()
            || args.common.config.is_some()
            || args.common.allow_negative.is_some();
        if model_flags {
            return Err(usage(
                "--from-manifest re-runs the recorded configuration; only --out-dir may be \
                 combined with it",
            ));
        }
        return rerun(manifest_path.clone(), args.common.out_dir);
    }

    let (common, resolver) = resolve_common(&args.common)?;
    let job = build_job(&args, &resolver)?;
    let seed = resolver
        .opt(args.seed, "seed")?
        .unwrap_or_else(rand::random::<u64>);
    let config = RunConfig {
        input: common.input,
        schema: common.schema,
        allow_negative: common.allow_negative,
        seed: Some(seed),
        action: Action::Segment { job },
    };
    execute_segment(&config, &common.out_dir, "segment")?;
    Ok(())
}

/// Re-runs a recorded segmentation and proves it reproduced: every output
/// file must digest to exactly what the manifest recorded.
fn rerun(manifest_path: PathBuf, out_dir: Option<PathBuf>) -> Result<()> {
    let recorded = RunManifest::load(&manifest_path)?;
    if !matches!(recorded.config.action, Action::Segment { .. }) {
        return Err(usage(format!(
            "{} records a {:?} run, not a segmentation",
            manifest_path.display(),
            recorded.invoked
        )));
    }
    verify_manifest_compatibility(&recorded)?;

    let out_dir = out_dir.unwrap_or_else(|| PathBuf::from(crate::config::DEFAULT_OUT_DIR));
    let fresh = execute_segment(&recorded.config, &out_dir, "segment")?;

    for output in &recorded.outputs {
        match fresh.output_sha256(&output.name) {
            Some(digest) if digest == output.sha256 => {}
            Some(_) => anyhow::bail!(
                "re-run produced different bytes for {} — the manifest's run is not reproducible \
                 on this input",
                output.name
            ),
            None => anyhow::bail!("re-run did not produce {}", output.name),
        }
    }
    println!(
        "reproduced {} output files bit-identically",
        recorded.outputs.len()
    );
    Ok(())
}
