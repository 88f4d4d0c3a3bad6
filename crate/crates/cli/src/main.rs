//! `rfmseg` — customer segmentation from card-transaction logs.
//!
//! Reads a transaction CSV, derives per-customer recency / frequency /
//! monetary features, and clusters customers with k-means, density
//! scanning, or hierarchical merging. Every run writes plot-ready CSV/JSON
//! files plus a manifest that reproduces the run bit-for-bit.

mod commands;
mod config;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "rfmseg",
    version,
    about = "Customer segmentation from card-transaction logs: RFM features, quantile scores, and three clustering pipelines",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute per-customer recency/frequency/monetary features
    Rfm(commands::rfm::RfmArgs),
    /// Quantile-score customers on each feature axis (1 = best)
    Score(commands::score::ScoreArgs),
    /// Scan k for k-means and suggest an elbow
    Elbow(commands::elbow::ElbowArgs),
    /// Grid-scan density-clustering parameters
    Sweep(commands::sweep::SweepArgs),
    /// Cluster customers into segments (three models)
    Segment(commands::segment::SegmentArgs),
    /// Re-cluster one segment of a previous segmentation run
    Refine(commands::refine::RefineArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Rfm(args) => commands::rfm::run(args),
        Command::Score(args) => commands::score::run(args),
        Command::Elbow(args) => commands::elbow::run(args),
        Command::Sweep(args) => commands::sweep::run(args),
        Command::Segment(args) => commands::segment::run(args),
        Command::Refine(args) => commands::refine::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let usage = err
                .downcast_ref::<rfmseg_core::Error>()
                .is_some_and(rfmseg_core::Error::is_usage);
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
