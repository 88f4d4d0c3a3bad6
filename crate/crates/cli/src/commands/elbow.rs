//! `rfmseg elbow` — k-means scatter across a k range, with a knee hint.

use anyhow::Result;
use clap::Args;

use rfmseg_core::clustering::kmeans::{elbow_curve, write_elbow_csv, KMeansOptions};

use crate::config::{Action, RunConfig, DEFAULT_K_MAX, DEFAULT_K_MIN, DEFAULT_RESTARTS};
use crate::manifest::Timings;

use super::{prepare, print_ingest_summary, resolve_common, save_manifest, CommonArgs, OutputWriter};

/// Fit k-means across a range of k and report WCSS per k.
#[derive(Debug, Args)]
pub struct ElbowArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Smallest k to try [default: 1]
    #[arg(long, value_name = "K")]
    k_min: Option<usize>,

    /// Largest k to try [default: 10]
    #[arg(long, value_name = "K")]
    k_max: Option<usize>,

    /// Seeded attempts per k; the best is kept [default: 5]
    #[arg(long, value_name = "N")]
    restarts: Option<usize>,

    /// RNG seed; drawn from entropy and recorded when omitted
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
}

/// Writes `elbow.csv` and prints the curve plus the knee suggestion.
pub fn run(args: ElbowArgs) -> Result<()> {
    let (common, resolver) = resolve_common(&args.common)?;
    let k_min = resolver.value(args.k_min, "k-min", DEFAULT_K_MIN)?;
    let k_max = resolver.value(args.k_max, "k-max", DEFAULT_K_MAX)?;
    let restarts = resolver.value(args.restarts, "restarts", DEFAULT_RESTARTS)?;
    let seed = resolver
        .opt(args.seed, "seed")?
        .unwrap_or_else(rand::random::<u64>);
    let config = RunConfig {
        input: common.input,
        schema: common.schema,
        allow_negative: common.allow_negative,
        seed: Some(seed),
        action: Action::Elbow {
            k_min,
            k_max,
            restarts,
        },
    };

    let mut timings = Timings::default();
    let (data, input_digest) = prepare(&config, &mut timings)?;
    print_ingest_summary(&data.report, data.vectors.len());
    println!("seed: {seed}");

    let curve = timings.time("elbow", || {
        elbow_curve(
            &data.points,
            k_min,
            k_max,
            restarts,
            seed,
            &KMeansOptions::default(),
        )
    })?;

    for entry in &curve.entries {
        println!("  k={:<3} wcss={:.6}", entry.k, entry.wcss);
    }
    match curve.knee {
        Some(k) => println!("knee suggestion: k={k}"),
        None => println!("knee suggestion: none (need at least three k values)"),
    }

    let mut writer = OutputWriter::new(&common.out_dir)?;
    timings.time("write", || -> Result<()> {
        let mut csv = Vec::new();
        write_elbow_csv(&mut csv, &curve)?;
        writer.write("elbow.csv", &csv)?;
        Ok(())
    })?;

    save_manifest(
        &common.out_dir,
        "elbow",
        config,
        input_digest,
        timings,
        writer.finish(),
    )?;
    Ok(())
}
