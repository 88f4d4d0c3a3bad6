//! `rfmseg sweep` — DBSCAN parameter grid scan.

use anyhow::Result;
use clap::Args;

use rfmseg_core::clustering::dbscan::{param_sweep, write_sweep_csv};

use crate::config::{parse_list, Action, RunConfig, DEFAULT_EPS_GRID, DEFAULT_MIN_POINTS_GRID};
use crate::manifest::Timings;

use super::{prepare, print_ingest_summary, resolve_common, save_manifest, CommonArgs, OutputWriter};

/// Run DBSCAN over an eps × min-points grid and tabulate the outcomes.
#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Comma-separated radii to try [default: 0.25,0.5,0.75,1.0,1.5,2.0]
    #[arg(long, value_name = "LIST")]
    eps: Option<String>,

    /// Comma-separated core thresholds to try [default: 3,5,10,20]
    #[arg(long, value_name = "LIST")]
    min_points: Option<String>,
}

/// Writes `sweep.csv` and prints one line per grid cell.
pub fn run(args: SweepArgs) -> Result<()> {
    let (common, resolver) = resolve_common(&args.common)?;
    let eps_text = resolver.value(args.eps, "eps", DEFAULT_EPS_GRID.to_string())?;
    let min_points_text =
        resolver.value(args.min_points, "min-points", DEFAULT_MIN_POINTS_GRID.to_string())?;
    let eps_grid: Vec<f64> = parse_list(&eps_text, "eps")?;
    let min_points_grid: Vec<usize> = parse_list(&min_points_text, "min-points")?;
    let config = RunConfig {
        input: common.input,
        schema: common.schema,
        allow_negative: common.allow_negative,
        seed: None,
        action: Action::Sweep {
            eps_grid: eps_grid.clone(),
            min_points_grid: min_points_grid.clone(),
        },
    };

    let mut timings = Timings::default();
    let (data, input_digest) = prepare(&config, &mut timings)?;
    print_ingest_summary(&data.report, data.vectors.len());

    let rows = timings.time("sweep", || {
        param_sweep(&data.points, &eps_grid, &min_points_grid)
    })?;
    for row in &rows {
        println!(
            "  eps={:<6} min_points={:<4} clusters={:<3} noise={:>5.1}% largest={}",
            row.eps,
            row.min_points,
            row.clusters,
            row.noise_fraction * 100.0,
            row.largest_cluster_size
        );
    }

    let mut writer = OutputWriter::new(&common.out_dir)?;
    timings.time("write", || -> Result<()> {
        let mut csv = Vec::new();
        write_sweep_csv(&mut csv, &rows)?;
        writer.write("sweep.csv", &csv)?;
        Ok(())
    })?;

    save_manifest(
        &common.out_dir,
        "sweep",
        config,
        input_digest,
        timings,
        writer.finish(),
    )?;
    Ok(())
}
