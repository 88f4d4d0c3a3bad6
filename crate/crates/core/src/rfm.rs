//! Recency / frequency / monetary features per customer.
//!
//! Given a deduplicated transaction log, each customer is reduced to three
//! numbers relative to a reference date:
//!
//! * **recency** — whole days from their most recent transaction *day* to
//!   the reference date; always >= 1 because the reference date sits one
//!   day after the newest transaction in the data.
//! * **frequency** — how many transactions they made.
//! * **monetary** — exact sum of their transaction amounts.
//!
//! Two representations feed downstream stages: z-score standardized columns
//! for geometric clustering, and small integer quantile scores (1 = best)
//! for classic RFM reporting.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;

use chrono::{Days, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::ingest::{FeatureMatrix, RawTransaction};
use crate::money::Money;
use crate::{Error, Result};

/// Column names of the RFM feature matrix, in storage order.
pub const RFM_COLUMNS: [&str; 3] = ["recency", "frequency", "monetary"];

/// One customer's RFM triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RfmVector {
    /// Customer identifier.
    pub customer_id: String,
    /// Whole days since the customer's latest transaction day; >= 1.
    pub recency_days: i64,
    /// Number of transactions.
    pub frequency: u64,
    /// Exact sum of amounts.
    pub monetary: Money,
}

/// The day recency is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceDate(pub NaiveDate);

impl fmt::Display for ReferenceDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d"))
    }
}

/// The day after the newest transaction day in the log, so that the most
/// recently active customer lands at recency exactly 1.
pub fn compute_reference_date(transactions: &[RawTransaction]) -> Result<ReferenceDate> {
    let latest = transactions
        .iter()
        .map(|t| t.op_date.date())
        .max()
        .ok_or_else(|| Error::EmptyInput("no transactions to derive a reference date from".to_string()))?;
    let reference = latest
        .checked_add_days(Days::new(1))
        .ok_or_else(|| Error::InvalidParam("latest transaction date has no next day".to_string()))?;
    Ok(ReferenceDate(reference))
}

/// Aggregates transactions into one RFM triple per customer, sorted by
/// customer id.
///
/// Recency counts whole days between the customer's latest transaction
/// *day* (time of day ignored) and `reference`; the reference date must lie
/// strictly after every transaction so recency is always >= 1. Frequencies
/// and monetary sums are exact, so they reconcile against the input:
/// frequencies add up to the transaction count, monetary values add up to
/// the grand total, to the cent.
pub fn compute_rfm(transactions: &[RawTransaction], reference: ReferenceDate) -> Result<Vec<RfmVector>> {
    if transactions.is_empty() {
        return Err(Error::EmptyInput("cannot compute RFM features of an empty log".to_string()));
    }

    struct Acc {
        latest_day: NaiveDate,
        frequency: u64,
        monetary: Money,
    }
    let mut per_customer: BTreeMap<&str, Acc> = BTreeMap::new();
    for t in transactions {
        let day = t.op_date.date();
        per_customer
            .entry(t.card_holder.as_str())
            .and_modify(|acc| {
                acc.latest_day = acc.latest_day.max(day);
                acc.frequency += 1;
            })
            .or_insert(Acc {
                latest_day: day,
                frequency: 1,
                monetary: Money::ZERO,
            });
        // Summed separately from and_modify so the overflow error can
        // propagate.
        let acc = per_customer.get_mut(t.card_holder.as_str()).expect("just inserted");
        acc.monetary = acc.monetary.checked_add(t.amount)?;
    }

    let mut vectors = Vec::with_capacity(per_customer.len());
    for (customer, acc) in per_customer {
        let recency_days = (reference.0 - acc.latest_day).num_days();
        if recency_days < 1 {
            return Err(Error::InvalidParam(format!(
                "reference date {} is not strictly after {customer:?}'s latest transaction day {}",
                reference, acc.latest_day
            )));
        }
        vectors.push(RfmVector {
            customer_id: customer.to_string(),
            recency_days,
            frequency: acc.frequency,
            monetary: acc.monetary,
        });
    }
    Ok(vectors)
}

/// Lays RFM triples out as a numeric matrix with [`RFM_COLUMNS`] columns.
pub fn rfm_to_matrix(vectors: &[RfmVector]) -> Result<FeatureMatrix> {
    let mut values = Vec::with_capacity(vectors.len() * 3);
    for v in vectors {
        values.push(v.recency_days as f64);
        values.push(v.frequency as f64);
        values.push(v.monetary.to_f64());
    }
    FeatureMatrix::new(
        RFM_COLUMNS.iter().map(|s| s.to_string()).collect(),
        vectors.iter().map(|v| v.customer_id.clone()).collect(),
        values,
    )
}

/// Per-column mean and population standard deviation captured by
/// [`standardize`], sufficient to map points in either direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    /// Column names, matching the matrix the params were fitted on.
    pub columns: Vec<String>,
    /// Per-column means.
    pub means: Vec<f64>,
    /// Per-column population standard deviations (all nonzero).
    pub stds: Vec<f64>,
}

/// Centers every column at 0 with unit population standard deviation.
///
/// All rows participate — outliers are deliberately kept, since downstream
/// density analysis is what identifies them. Needs at least two rows, and
/// every column must actually vary: a constant column would divide by zero
/// and carries no clustering signal, so it fails with
/// [`Error::ZeroVariance`] instead of producing garbage.
pub fn standardize(matrix: &FeatureMatrix) -> Result<(FeatureMatrix, StandardizationParams)> {
    if matrix.n_rows() < 2 {
        return Err(Error::EmptyInput(format!(
            "standardization needs at least 2 rows, got {}",
            matrix.n_rows()
        )));
    }
    matrix.ensure_finite()?;

    let n = matrix.n_rows() as f64;
    let mut means = Vec::with_capacity(matrix.n_cols());
    let mut stds = Vec::with_capacity(matrix.n_cols());
    for col in 0..matrix.n_cols() {
        let first = matrix.value(0, col);
        if matrix.column_values(col).all(|v| v == first) {
            return Err(Error::ZeroVariance {
                name: matrix.column_names()[col].clone(),
            });
        }
        let mean = matrix.column_values(col).sum::<f64>() / n;
        let var = matrix.column_values(col).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = var.sqrt();
        if std == 0.0 || !std.is_finite() {
            return Err(Error::ZeroVariance {
                name: matrix.column_names()[col].clone(),
            });
        }
        means.push(mean);
        stds.push(std);
    }

    let mut standardized = matrix.clone();
    for row in 0..matrix.n_rows() {
        for col in 0..matrix.n_cols() {
            standardized.set_value(row, col, (matrix.value(row, col) - means[col]) / stds[col]);
        }
    }
    Ok((
        standardized,
        StandardizationParams {
            columns: matrix.column_names().to_vec(),
            means,
            stds,
        },
    ))
}

/// Maps standardized values back to raw units (`x * std + mean`).
///
/// The matrix's columns must match the params' columns by name and order.
pub fn inverse_standardize(matrix: &FeatureMatrix, params: &StandardizationParams) -> Result<FeatureMatrix> {
    if matrix.column_names() != params.columns.as_slice() {
        return Err(Error::InvalidParam(format!(
            "standardization params were fitted on columns {:?}, matrix has {:?}",
            params.columns,
            matrix.column_names()
        )));
    }
    let mut raw = matrix.clone();
    for row in 0..matrix.n_rows() {
        for col in 0..matrix.n_cols() {
            raw.set_value(row, col, matrix.value(row, col) * params.stds[col] + params.means[col]);
        }
    }
    Ok(raw)
}

/// Inverse-maps a single standardized point (e.g. a centroid) to raw units.
pub fn inverse_standardize_point(point: &[f64], params: &StandardizationParams) -> Result<Vec<f64>> {
    if point.len() != params.columns.len() {
        return Err(Error::InvalidParam(format!(
            "point has {} coordinates, params expect {}",
            point.len(),
            params.columns.len()
        )));
    }
    Ok(point
        .iter()
        .zip(params.stds.iter().zip(&params.means))
        .map(|(x, (s, m))| x * s + m)
        .collect())
}

/// One customer's quantile scores; 1 is the best bin on every axis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RfmScore {
    /// Customer identifier.
    pub customer_id: String,
    /// Recency score: 1 = most recent quantile.
    pub r_score: u32,
    /// Frequency score: 1 = most frequent quantile.
    pub f_score: u32,
    /// Monetary score: 1 = highest-spending quantile.
    pub m_score: u32,
    /// The three digits concatenated, e.g. `"111"` or `"543"`.
    pub combined: String,
}

/// Buckets each RFM feature into `quantiles` rank-based bins and scores
/// every customer on all three axes.
///
/// Score 1 is always the *best* bin: the lowest recency values, the highest
/// frequencies, the highest spend. Bin edges split ranks as evenly as
/// possible; customers with *equal* feature values always receive equal
/// scores (the whole tied run takes the bin its first rank falls in), so a
/// fully uniform population scores identically everywhere. With `q`
/// quantiles there are at most `q^3` distinct combined scores. `quantiles`
/// must lie in 1..=9 so the combined form stays one digit per axis.
pub fn score_rfm(vectors: &[RfmVector], quantiles: u32) -> Result<Vec<RfmScore>> {
    if !(1..=9).contains(&quantiles) {
        return Err(Error::InvalidParam(format!(
            "quantiles must lie in 1..=9, got {quantiles}"
        )));
    }
    if vectors.is_empty() {
        return Err(Error::EmptyInput("no customers to score".to_string()));
    }

    let recency: Vec<i64> = vectors.iter().map(|v| v.recency_days).collect();
    let frequency: Vec<u64> = vectors.iter().map(|v| v.frequency).collect();
    let monetary: Vec<Money> = vectors.iter().map(|v| v.monetary).collect();

    let r = quantile_scores(&recency, true, quantiles);
    let f = quantile_scores(&frequency, false, quantiles);
    let m = quantile_scores(&monetary, false, quantiles);

    Ok(vectors
        .iter()
        .enumerate()
        .map(|(i, v)| RfmScore {
            customer_id: v.customer_id.clone(),
            r_score: r[i],
            f_score: f[i],
            m_score: m[i],
            combined: format!("{}{}{}", r[i], f[i], m[i]),
        })
        .collect())
}

/// Number of distinct combined scores present.
pub fn distinct_score_count(scores: &[RfmScore]) -> usize {
    scores
        .iter()
        .map(|s| (s.r_score, s.f_score, s.m_score))
        .collect::<HashSet<_>>()
        .len()
}

/// Rank-based quantile binning of one feature.
///
/// Values are ranked best-first (`better_low` picks the direction); bin `b`
/// (1-based) covers ranks `[ceil((b-1) * n / q), ceil(b * n / q))`, which
/// splits the population as evenly as integer arithmetic allows. A run of
/// equal values is assigned as a block to the bin containing its first
/// rank, so equal inputs can never receive different scores.
fn quantile_scores<T: Ord + Copy>(values: &[T], better_low: bool, q: u32) -> Vec<u32> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let byval = if better_low {
            values[a].cmp(&values[b])
        } else {
            values[b].cmp(&values[a])
        };
        byval.then(a.cmp(&b))
    });

    let edge = |b: u64| (b * n as u64).div_ceil(u64::from(q));
    let mut scores = vec![0u32; n];
    let mut run_start = 0usize;
    let mut bin = 1u64;
    while run_start < n {
        let mut run_end = run_start + 1;
        while run_end < n && values[order[run_end]] == values[order[run_start]] {
            run_end += 1;
        }
        while edge(bin) <= run_start as u64 {
            bin += 1;
        }
        for &i in &order[run_start..run_end] {
            scores[i] = bin as u32;
        }
        run_start = run_end;
    }
    scores
}

/// Writes the per-customer feature CSV: raw columns always, standardized
/// `*_z` columns when `standardized` is given (rows must align 1:1).
pub fn write_rfm_csv<W: Write>(
    writer: W,
    vectors: &[RfmVector],
    standardized: Option<&FeatureMatrix>,
) -> Result<()> {
    if let Some(z) = standardized {
        if z.n_rows() != vectors.len() || z.n_cols() != 3 {
            return Err(Error::InvalidParam(format!(
                "standardized matrix is {}x{}, expected {}x3",
                z.n_rows(),
                z.n_cols(),
                vectors.len()
            )));
        }
    }
    let mut w = csv::Writer::from_writer(writer);
    match standardized {
        Some(_) => w.write_record([
            "customer_id",
            "recency",
            "frequency",
            "monetary",
            "recency_z",
            "frequency_z",
            "monetary_z",
        ])?,
        None => w.write_record(["customer_id", "recency", "frequency", "monetary"])?,
    }
    for (i, v) in vectors.iter().enumerate() {
        let mut record = vec![
            v.customer_id.clone(),
            v.recency_days.to_string(),
            v.frequency.to_string(),
            v.monetary.to_string(),
        ];
        if let Some(z) = standardized {
            for col in 0..3 {
                record.push(z.value(i, col).to_string());
            }
        }
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the per-customer score CSV.
pub fn write_scores_csv<W: Write>(writer: W, scores: &[RfmScore]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["customer_id", "r_score", "f_score", "m_score", "combined"])?;
    for s in scores {
        w.write_record([
            s.customer_id.as_str(),
            &s.r_score.to_string(),
            &s.f_score.to_string(),
            &s.m_score.to_string(),
            s.combined.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
