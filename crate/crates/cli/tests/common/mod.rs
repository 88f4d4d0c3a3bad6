//! Shared helpers for the CLI integration and acceptance suites: running the
//! binary, building synthetic transaction fixtures, and reading outputs back.
#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

use chrono::NaiveDate;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rfmseg_core::ingest::{write_transactions_csv, Schema};
use rfmseg_core::money::Money;
use rfmseg_core::synth::{transactions_for_rfm, RfmTarget};

/// Path to the compiled `rfmseg` binary under test.
pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_rfmseg")
}

/// Captured outcome of one binary invocation.
pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl Run {
    pub fn assert_ok(&self) -> &Run {
        assert_eq!(
            self.code, 0,
            "expected success\nstdout:\n{}\nstderr:\n{}",
            self.stdout, self.stderr
        );
        self
    }

    pub fn assert_code(&self, code: i32) -> &Run {
        assert_eq!(
            self.code, code,
            "expected exit code {code}\nstdout:\n{}\nstderr:\n{}",
            self.stdout, self.stderr
        );
        self
    }
}

/// Runs `rfmseg` with `args`, working directory `dir`.
pub fn run_in(dir: &Path, args: &[&str]) -> Run {
    let output = Command::new(bin())
        .args(args)
        .current_dir(dir)
        .output()
        .expect("failed to spawn rfmseg");
    Run {
        code: output.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&output.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
    }
}

/// Reference date used by all synthetic fixtures.
pub fn reference_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2024, 6, 1).unwrap()
}

/// Renders targets into a transaction CSV (default column names) at `path`.
pub fn write_targets_csv(path: &Path, targets: &[RfmTarget]) {
    let txns = transactions_for_rfm(targets, reference_date()).expect("fixture synthesis failed");
    let mut buf = Vec::new();
    write_transactions_csv(&mut buf, &txns, &Schema::default()).unwrap();
    std::fs::write(path, buf).unwrap();
}

/// 125 customers covering every (r, f, m) cell of a 5x5x5 grid: recency
/// 1..=5 days, frequency 1..=5 transactions, spend 10..=50 dollars. Each
/// attribute value is shared by exactly 25 customers, so five-way quantile
/// scoring puts exactly 25 customers in each attribute bin.
pub fn grid_targets() -> Vec<RfmTarget> {
    let mut targets = Vec::with_capacity(125);
    for r in 0..5i64 {
        for f in 0..5u64 {
            for m in 0..5i64 {
                targets.push(RfmTarget {
                    customer_id: format!("c{:03}", r as u64 * 25 + f * 5 + m as u64),
                    recency_days: 1 + r,
                    frequency: 1 + f,
                    monetary: Money::from_minor((1 + m) * 1000),
                });
            }
        }
    }
    targets
}

/// Four well-separated customer archetypes (50 each) whose RFM triples sit
/// at distinct corners of the attribute space, with small uniform jitter.
/// Standardization keeps the groups far apart, so k = 4 is unambiguous.
pub fn corner_targets(seed: u64) -> Vec<RfmTarget> {
    let mut rng = StdRng::seed_from_u64(seed);
    // (recency hi?, frequency hi?, monetary hi?) per corner; every pair of
    // corners differs in at least two attributes.
    let corners = [
        (false, true, true),
        (true, false, true),
        (true, true, false),
        (false, false, false),
    ];
    let mut targets = Vec::with_capacity(200);
    for (c, &(r_hi, f_hi, m_hi)) in corners.iter().enumerate() {
        for i in 0..50 {
            let recency = if r_hi {
                rng.random_range(61..=65)
            } else if c == 0 && i == 0 {
                1 // anchor the newest day so the derived reference matches
            } else {
                rng.random_range(1..=3)
            };
            let frequency = if f_hi {
                rng.random_range(21..=25)
            } else {
                rng.random_range(1..=3)
            };
            let cents = if m_hi {
                rng.random_range(48_000..=52_000)
            } else {
                rng.random_range(1_000..=3_000)
            };
            targets.push(RfmTarget {
                customer_id: format!("corner{c}-{i:02}"),
                recency_days: recency,
                frequency,
                monetary: Money::from_minor(cents),
            });
        }
    }
    targets
}

/// Two large, homogeneous customer groups plus eight extreme spenders whose
/// recency splits them into two lumps of four. Density clustering finds the
/// two big groups and flags the eight extremes as noise.
pub fn outlier_targets(seed: u64) -> Vec<RfmTarget> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut targets = Vec::with_capacity(128);
    for i in 0..60 {
        targets.push(RfmTarget {
            customer_id: format!("densea-{i:02}"),
            recency_days: if i == 0 { 1 } else { rng.random_range(1..=5) },
            frequency: rng.random_range(8..=12),
            monetary: Money::from_minor(rng.random_range(9_000..=11_000)),
        });
    }
    for i in 0..60 {
        targets.push(RfmTarget {
            customer_id: format!("denseb-{i:02}"),
            recency_days: rng.random_range(45..=55),
            frequency: rng.random_range(1..=3),
            monetary: Money::from_minor(rng.random_range(1_500..=2_500)),
        });
    }
    for i in 0..8 {
        let recency = if i < 4 {
            rng.random_range(95..=100)
        } else {
            rng.random_range(180..=190)
        };
        targets.push(RfmTarget {
            customer_id: format!("whale-{i}"),
            recency_days: recency,
            frequency: rng.random_range(25..=30),
            monetary: Money::from_minor(rng.random_range(80_000..=100_000)),
        });
    }
    targets
}

/// Reads a file to a string, panicking with the path on failure.
pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("failed to read {}: {e}", path.display()))
}

/// Parses a JSON file.
pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&read(path))
        .unwrap_or_else(|e| panic!("invalid JSON in {}: {e}", path.display()))
}

/// Splits a simple (unquoted) CSV into header and rows of fields.
pub fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines
        .next()
        .expect("CSV missing header")
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

/// Column values (as strings) for a named CSV column.
pub fn csv_column(text: &str, name: &str) -> Vec<String> {
    let (header, rows) = parse_csv(text);
    let idx = header
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name} in header {header:?}"));
    rows.into_iter().map(|mut r| r.remove(idx)).collect()
}

/// Column values parsed as f64.
pub fn csv_column_f64(text: &str, name: &str) -> Vec<f64> {
    csv_column(text, name)
        .into_iter()
        .map(|v| v.parse().expect("non-numeric CSV field"))
        .collect()
}

/// Byte-equality check between two files with a readable failure message.
pub fn assert_same_bytes(a: &Path, b: &Path) {
    let ba = std::fs::read(a).unwrap_or_else(|e| panic!("read {}: {e}", a.display()));
    let bb = std::fs::read(b).unwrap_or_else(|e| panic!("read {}: {e}", b.display()));
    assert!(
        ba == bb,
        "files differ: {} vs {}",
        a.display(),
        b.display()
    );
}
