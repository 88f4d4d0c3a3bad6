//! Transaction-log ingestion and generic feature-matrix cleaning.
//!
//! Input is a headered CSV of card transactions. Column names are mapped
//! through a [`Schema`] so exports from different processors can be read
//! without editing the file. Parsing is strict per field but tolerant per
//! row: a malformed row is counted, sampled into the report and skipped,
//! while the rest of the file continues to load. Only structural problems
//! (unreadable stream, missing header columns) abort the whole load.
//!
//! Downstream numeric cleanup (mean imputation, correlation-based column
//! pruning) operates on a plain [`FeatureMatrix`] so it can be reused for
//! feature sets beyond the built-in RFM triple.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::money::Money;
use crate::{Error, Result};

/// Maps the logical transaction fields onto CSV header names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    /// Column holding the customer (card holder) identifier.
    pub holder: String,
    /// Column holding the unique transaction identifier.
    pub id: String,
    /// Column holding the transaction amount.
    pub amount: String,
    /// Column holding the operation timestamp or date.
    pub date: String,
}

impl Default for Schema {
    fn default() -> Schema {
        Schema {
            holder: "card_holder".to_string(),
            id: "transaction_id".to_string(),
            amount: "amount".to_string(),
            date: "op_date".to_string(),
        }
    }
}

/// Knobs for [`parse_transactions`].
#[derive(Debug, Clone, Default)]
pub struct ParseOptions {
    /// Accept negative amounts (refunds/chargebacks). When false, negative
    /// rows are rejected and counted rather than silently kept.
    pub allow_negative: bool,
}

/// One parsed transaction row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTransaction {
    /// Customer identifier.
    pub card_holder: String,
    /// Unique transaction identifier (dedup key).
    pub transaction_id: String,
    /// Exact amount in minor units.
    pub amount: Money,
    /// Operation timestamp; date-only inputs are read as midnight.
    pub op_date: NaiveDateTime,
}

/// A sampled row rejection: which record failed and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based line number in the source file (0 when unknown).
    pub line: u64,
    /// Human-readable reason the row was rejected.
    pub reason: String,
}

/// Bookkeeping for a load: every input row is accounted for exactly once as
/// kept, duplicate or rejected.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    /// Data rows seen in the file (header excluded).
    pub rows_read: usize,
    /// Rows that survived parsing and deduplication.
    pub rows_kept: usize,
    /// Well-formed rows dropped because their transaction id was already
    /// seen.
    pub duplicates_dropped: usize,
    /// Rows rejected as malformed.
    pub rows_rejected: usize,
    /// Up to [`IngestReport::MAX_SAMPLES`] example rejections.
    pub rejection_samples: Vec<RowError>,
    /// Imputed cell count per column name, filled in by
    /// [`impute_missing`]'s caller.
    pub values_imputed: BTreeMap<String, usize>,
}

impl IngestReport {
    /// Cap on stored rejection examples; counts are always complete.
    pub const MAX_SAMPLES: usize = 20;

    /// Accounts for `n` rows removed by deduplication.
    pub fn note_duplicates(&mut self, n: usize) {
        self.duplicates_dropped += n;
        self.rows_kept -= n;
    }

    /// Records imputed-cell counts from a cleaning pass.
    pub fn note_imputed(&mut self, counts: BTreeMap<String, usize>) {
        for (column, n) in counts {
            *self.values_imputed.entry(column).or_insert(0) += n;
        }
    }

    /// True when every input row is accounted for exactly once.
    pub fn reconciles(&self) -> bool {
        self.rows_kept + self.duplicates_dropped + self.rows_rejected == self.rows_read
    }

    fn reject(&mut self, line: u64, reason: String) {
        self.rows_rejected += 1;
        if self.rejection_samples.len() < Self::MAX_SAMPLES {
            self.rejection_samples.push(RowError { line, reason });
        }
    }
}

/// Parses a timestamp in any of the accepted forms: `YYYY-MM-DD HH:MM:SS`,
/// `YYYY-MM-DDTHH:MM:SS`, or bare `YYYY-MM-DD` (read as midnight).
pub fn parse_op_date(text: &str) -> Option<NaiveDateTime> {
    for format in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(text, format) {
            return Some(dt);
        }
    }
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
}

/// Reads a transaction CSV, keeping well-formed rows and accounting for the
/// rest.
///
/// Fails outright only when the stream itself is unreadable or the header
/// lacks one of the columns named by `schema`; individual bad rows are
/// rejected row-by-row into the report. Fields are whitespace-trimmed before
/// validation. The returned transactions preserve file order and may still
/// contain duplicate ids — run [`dedupe`] next.
pub fn parse_transactions<R: Read>(
    reader: R,
    schema: &Schema,
    options: &ParseOptions,
) -> Result<(Vec<RawTransaction>, IngestReport)> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(reader);

    let headers = csv_reader.headers()?.clone();
    let column = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MissingColumn {
                name: name.to_string(),
            })
    };
    let holder_col = column(&schema.holder)?;
    let id_col = column(&schema.id)?;
    let amount_col = column(&schema.amount)?;
    let date_col = column(&schema.date)?;
    let needed = holder_col.max(id_col).max(amount_col).max(date_col);

    let mut transactions = Vec::new();
    let mut report = IngestReport::default();

    for record in csv_reader.byte_records() {
        report.rows_read += 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                report.reject(line, format!("unreadable record: {e}"));
                continue;
            }
        };
        let line = record.position().map_or(0, |p| p.line());
        if record.len() <= needed {
            report.reject(
                line,
                format!("expected at least {} fields, found {}", needed + 1, record.len()),
            );
            continue;
        }

        let field = |idx: usize| -> std::result::Result<&str, String> {
            std::str::from_utf8(&record[idx])
                .map(str::trim)
                .map_err(|_| format!("field {:?} is not valid utf-8", headers[idx].to_string()))
        };

        let parsed = (|| -> std::result::Result<RawTransaction, String> {
            let holder = field(holder_col)?;
            if holder.is_empty() {
                return Err(format!("empty {:?}", schema.holder));
            }
            let id = field(id_col)?;
            if id.is_empty() {
                return Err(format!("empty {:?}", schema.id));
            }
            let amount_text = field(amount_col)?;
            let amount = Money::parse(amount_text).map_err(|e| e.to_string())?;
            if amount.is_negative() && !options.allow_negative {
                return Err(format!("negative amount {amount}"));
            }
            let date_text = field(date_col)?;
            let op_date = parse_op_date(date_text)
                .ok_or_else(|| format!("malformed date {date_text:?}"))?;
            Ok(RawTransaction {
                card_holder: holder.to_string(),
                transaction_id: id.to_string(),
                amount,
                op_date,
            })
        })();

        match parsed {
            Ok(txn) => {
                transactions.push(txn);
                report.rows_kept += 1;
            }
            Err(reason) => report.reject(line, reason),
        }
    }

    Ok((transactions, report))
}

/// Writes transactions back out as CSV under the given schema's header
/// names, inverse of [`parse_transactions`] for clean data.
pub fn write_transactions_csv<W: Write>(
    writer: W,
    transactions: &[RawTransaction],
    schema: &Schema,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([&schema.holder, &schema.id, &schema.amount, &schema.date])?;
    for t in transactions {
        w.write_record([
            t.card_holder.as_str(),
            t.transaction_id.as_str(),
            &t.amount.to_string(),
            &t.op_date.format("%Y-%m-%d %H:%M:%S").to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Drops repeated transaction ids, keeping the first occurrence in file
/// order. Returns the surviving rows and the number removed. Idempotent.
pub fn dedupe(transactions: Vec<RawTransaction>) -> (Vec<RawTransaction>, usize) {
    let before = transactions.len();
    let mut seen = HashSet::with_capacity(before);
    let kept: Vec<RawTransaction> = transactions
        .into_iter()
        .filter(|t| seen.insert(t.transaction_id.clone()))
        .collect();
    let dropped = before - kept.len();
    (kept, dropped)
}

/// A dense row-major numeric table with named columns and per-row ids.
///
/// Missing values are represented as `NaN` until [`impute_missing`] runs;
/// every numeric stage downstream requires a fully finite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    column_names: Vec<String>,
    row_ids: Vec<String>,
    values: Vec<f64>,
}

impl FeatureMatrix {
    /// Builds a matrix from row-major values; `values.len()` must equal
    /// `row_ids.len() * column_names.len()`.
    pub fn new(column_names: Vec<String>, row_ids: Vec<String>, values: Vec<f64>) -> Result<FeatureMatrix> {
        if values.len() != row_ids.len() * column_names.len() {
            return Err(Error::InvalidParam(format!(
                "value buffer holds {} cells but {} rows x {} columns were declared",
                values.len(),
                row_ids.len(),
                column_names.len()
            )));
        }
        Ok(FeatureMatrix {
            column_names,
            row_ids,
            values,
        })
    }

    /// Number of rows.
    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    /// Number of columns.
    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    /// Column names in storage order.
    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Row identifiers in storage order.
    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    /// Index of a named column.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    /// One cell.
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols() + col]
    }

    /// Overwrites one cell.
    pub fn set_value(&mut self, row: usize, col: usize, value: f64) {
        let cols = self.n_cols();
        self.values[row * cols + col] = value;
    }

    /// One full row as a slice.
    pub fn row(&self, row: usize) -> &[f64] {
        let cols = self.n_cols();
        &self.values[row * cols..(row + 1) * cols]
    }

    /// Iterates one column top to bottom.
    pub fn column_values(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_rows()).map(move |r| self.value(r, col))
    }

    /// The raw row-major buffer.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Fails if any cell is NaN or infinite.
    pub fn ensure_finite(&self) -> Result<()> {
        for (i, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                let cols = self.n_cols();
                return Err(Error::NonFinite(format!(
                    "cell ({}, {:?}) is {}",
                    self.row_ids[i / cols],
                    self.column_names[i % cols],
                    v
                )));
            }
        }
        Ok(())
    }
}

/// Replaces NaN cells with their column's mean over present values.
///
/// Returns the filled matrix and the number of cells imputed per column
/// (columns with nothing missing are omitted). A column with *no* present
/// values has no mean and fails with [`Error::ColumnAllMissing`]. Present
/// values are never touched, so each column's mean is preserved.
pub fn impute_missing(matrix: &FeatureMatrix) -> Result<(FeatureMatrix, BTreeMap<String, usize>)> {
    let mut filled = matrix.clone();
    let mut counts = BTreeMap::new();
    for col in 0..matrix.n_cols() {
        let mut sum = 0.0;
        let mut present = 0usize;
        let mut missing = 0usize;
        for v in matrix.column_values(col) {
            if v.is_nan() {
                missing += 1;
            } else {
                sum += v;
                present += 1;
            }
        }
        if missing == 0 {
            continue;
        }
        if present == 0 {
            return Err(Error::ColumnAllMissing {
                name: matrix.column_names[col].clone(),
            });
        }
        let mean = sum / present as f64;
        for row in 0..matrix.n_rows() {
            if matrix.value(row, col).is_nan() {
                filled.set_value(row, col, mean);
            }
        }
        counts.insert(matrix.column_names[col].clone(), missing);
    }
    Ok((filled, counts))
}

/// A column removed by [`correlation_filter`], with the evidence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedColumn {
    /// Column name.
    pub name: String,
    /// Pearson correlation against the target (0 when undefined).
    pub r: f64,
    /// True when the correlation was undefined because the column (or the
    /// target) never varies; such columns carry no signal.
    pub zero_variance: bool,
}

/// Keeps the target column plus every column whose absolute Pearson
/// correlation with the target is at least `threshold`.
///
/// A zero-variance column has undefined correlation; it is treated as 0
/// (and flagged), so it is dropped by any positive threshold. The matrix
/// must already be fully imputed. Column order is preserved.
pub fn correlation_filter(
    matrix: &FeatureMatrix,
    target: &str,
    threshold: f64,
) -> Result<(FeatureMatrix, Vec<DroppedColumn>)> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParam(format!(
            "correlation threshold must lie in [0, 1], got {threshold}"
        )));
    }
    let target_col = matrix
        .column_index(target)
        .ok_or_else(|| Error::MissingColumn {
            name: target.to_string(),
        })?;
    if matrix.n_rows() == 0 {
        return Err(Error::EmptyInput("correlation filter on empty matrix".to_string()));
    }
    matrix.ensure_finite()?;

    let target_values: Vec<f64> = matrix.column_values(target_col).collect();
    let mut kept_cols = Vec::new();
    let mut dropped = Vec::new();
    for col in 0..matrix.n_cols() {
        if col == target_col {
            kept_cols.push(col);
            continue;
        }
        let values: Vec<f64> = matrix.column_values(col).collect();
        let (r, defined) = pearson(&values, &target_values);
        if defined && r.abs() >= threshold {
            kept_cols.push(col);
        } else {
            dropped.push(DroppedColumn {
                name: matrix.column_names[col].clone(),
                r,
                zero_variance: !defined,
            });
        }
    }

    let column_names: Vec<String> = kept_cols
        .iter()
        .map(|&c| matrix.column_names[c].clone())
        .collect();
    let mut values = Vec::with_capacity(matrix.n_rows() * kept_cols.len());
    for row in 0..matrix.n_rows() {
        for &c in &kept_cols {
            values.push(matrix.value(row, c));
        }
    }
    let filtered = FeatureMatrix::new(column_names, matrix.row_ids.clone(), values)?;
    Ok((filtered, dropped))
}

/// Pearson correlation of two equal-length columns. The second return is
/// false (with r = 0) when either side has zero variance, where the
/// coefficient is undefined.
fn pearson(x: &[f64], y: &[f64]) -> (f64, bool) {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    // Constant columns: detect exactly, not via rounding of var.
    let constant = |col: &[f64]| col.iter().all(|&v| v == col[0]);
    if constant(x) || constant(y) || var_x == 0.0 || var_y == 0.0 {
        return (0.0, false);
    }
    ((cov / (var_x.sqrt() * var_y.sqrt())).clamp(-1.0, 1.0), true)
}
