//! `rfmseg rfm` — the per-customer feature table.

use anyhow::Result;
use clap::Args;

use rfmseg_core::ingest::FeatureMatrix;
use rfmseg_core::rfm::write_rfm_csv;

use crate::config::{Action, RunConfig};
use crate::manifest::Timings;

use super::{load_features, print_ingest_summary, resolve_common, save_manifest, CommonArgs, OutputWriter};

/// Compute recency / frequency / monetary features per customer.
#[derive(Debug, Args)]
pub struct RfmArgs {
    #[command(flatten)]
    common: CommonArgs,
}

/// Writes `rfm.csv` (raw and standardized columns) and
/// `ingest_report.json`, and prints the row accounting.
pub fn run(args: RfmArgs) -> Result<()> {
    let (common, _resolver) = resolve_common(&args.common)?;
    let config = RunConfig {
        input: common.input,
        schema: common.schema,
        allow_negative: common.allow_negative,
        seed: None,
        action: Action::Rfm,
    };

    let mut timings = Timings::default();
    let (vectors, report, input_digest) = load_features(&config, &mut timings)?;
    print_ingest_summary(&report, vectors.len());

    let z: FeatureMatrix = timings.time("standardize", || -> Result<_> {
        let matrix = rfmseg_core::rfm::rfm_to_matrix(&vectors)?;
        let (z, _params) = rfmseg_core::rfm::standardize(&matrix)?;
        Ok(z)
    })?;

    let mut writer = OutputWriter::new(&common.out_dir)?;
    timings.time("write", || -> Result<()> {
        let mut csv = Vec::new();
        write_rfm_csv(&mut csv, &vectors, Some(&z))?;
        writer.write("rfm.csv", &csv)?;

        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        writer.write("ingest_report.json", json.as_bytes())?;
        Ok(())
    })?;

    save_manifest(
        &common.out_dir,
        "rfm",
        config,
        input_digest,
        timings,
        writer.finish(),
    )?;
    Ok(())
}
