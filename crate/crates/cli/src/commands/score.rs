//! `rfmseg score` — quantile scores per customer.

use anyhow::Result;
use clap::Args;

use rfmseg_core::rfm::{distinct_score_count, score_rfm, write_scores_csv};

use crate::config::{usage, Action, RunConfig, DEFAULT_QUANTILES};
use crate::manifest::Timings;

use super::{load_features, print_ingest_summary, resolve_common, save_manifest, CommonArgs, OutputWriter};

/// Score every customer 1..=q per feature axis (1 = best).
#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Bins per axis, 1..=9 [default: 5]
    #[arg(long, value_name = "Q")]
    quantiles: Option<u32>,
}

/// Writes `scores.csv` and prints how many distinct combined scores the
/// population actually uses.
pub fn run(args: ScoreArgs) -> Result<()> {
    let (common, resolver) = resolve_common(&args.common)?;
    let quantiles = resolver.value(args.quantiles, "quantiles", DEFAULT_QUANTILES)?;
    let config = RunConfig {
        input: common.input,
        schema: common.schema,
        allow_negative: common.allow_negative,
        seed: None,
        action: Action::Score { quantiles },
    };

    let mut timings = Timings::default();
    let (vectors, report, input_digest) = load_features(&config, &mut timings)?;
    print_ingest_summary(&report, vectors.len());

    if quantiles as usize > vectors.len() {
        return Err(usage(format!(
            "quantiles={} exceeds the number of customers ({}) — bins would be empty",
            quantiles,
            vectors.len()
        )));
    }

    let scores = timings.time("score", || score_rfm(&vectors, quantiles))?;
    let distinct = distinct_score_count(&scores);
    println!(
        "distinct combined scores: {} (q={}, at most {})",
        distinct,
        quantiles,
        quantiles.pow(3)
    );

    let mut writer = OutputWriter::new(&common.out_dir)?;
    timings.time("write", || -> Result<()> {
        let mut csv = Vec::new();
        write_scores_csv(&mut csv, &scores)?;
        writer.write("scores.csv", &csv)?;
        Ok(())
    })?;

    save_manifest(
        &common.out_dir,
        "score",
        config,
        input_digest,
        timings,
        writer.finish(),
    )?;
    Ok(())
}
