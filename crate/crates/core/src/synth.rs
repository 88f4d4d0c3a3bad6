//! Deterministic synthetic data: Gaussian blobs for clustering tests and
//! transaction logs with exactly prescribed RFM outcomes.
//!
//! Everything here is seeded and reproducible; the generators exist so
//! tests, benchmarks and examples can build inputs with known structure
//! instead of shipping opaque fixture files.

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::clustering::PointSet;
use crate::ingest::RawTransaction;
use crate::money::Money;
use crate::{Error, Result};

/// One isotropic Gaussian cluster to generate.
#[derive(Debug, Clone)]
pub struct BlobSpec {
    /// Blob mean.
    pub center: Vec<f64>,
    /// Points to draw.
    pub n: usize,
    /// Standard deviation per coordinate.
    pub sigma: f64,
}

/// Draws points from a mixture of isotropic Gaussians, returning the point
/// set and each point's generating blob index (ground truth for agreement
/// tests). Point ids are `x000000`, `x000001`, ... in draw order, blobs in
/// spec order.
pub fn gaussian_blobs(specs: &[BlobSpec], seed: u64) -> Result<(PointSet, Vec<usize>)> {
    if specs.is_empty() {
        return Err(Error::InvalidParam("no blob specs given".to_string()));
    }
    let dims = specs[0].center.len();
    if dims == 0 {
        return Err(Error::InvalidParam("blob centers need at least one dimension".to_string()));
    }
    for (b, spec) in specs.iter().enumerate() {
        if spec.center.len() != dims {
            return Err(Error::InvalidParam(format!(
                "blob {b} has {} dims, blob 0 has {dims}",
                spec.center.len()
            )));
        }
        if spec.n == 0 {
            return Err(Error::InvalidParam(format!("blob {b} has no points")));
        }
        if !(spec.sigma >= 0.0 && spec.sigma.is_finite()) {
            return Err(Error::InvalidParam(format!("blob {b} has invalid sigma {}", spec.sigma)));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: usize = specs.iter().map(|s| s.n).sum();
    let mut ids = Vec::with_capacity(total);
    let mut values = Vec::with_capacity(total * dims);
    let mut truth = Vec::with_capacity(total);
    for (b, spec) in specs.iter().enumerate() {
        for _ in 0..spec.n {
            ids.push(format!("x{:06}", ids.len()));
            for d in 0..dims {
                let z: f64 = rng.sample(StandardNormal);
                values.push(spec.center[d] + spec.sigma * z);
            }
            truth.push(b);
        }
    }
    Ok((PointSet::new(ids, values, dims)?, truth))
}

/// Uniform random points in the box `[low, high]^dims`.
pub fn uniform_points(n: usize, dims: usize, low: f64, high: f64, seed: u64) -> Result<PointSet> {
    if !(low < high) {
        return Err(Error::InvalidParam(format!(
            "need low < high, got low={low}, high={high}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = (0..n).map(|i| format!("x{i:06}")).collect();
    let values = (0..n * dims).map(|_| rng.random_range(low..high)).collect();
    PointSet::new(ids, values, dims)
}

/// The exact RFM triple a generated customer should end up with.
#[derive(Debug, Clone)]
pub struct RfmTarget {
    /// Customer id to emit.
    pub customer_id: String,
    /// Desired recency in days (>= 1).
    pub recency_days: i64,
    /// Desired transaction count (>= 1).
    pub frequency: u64,
    /// Desired exact total spend (>= 0).
    pub monetary: Money,
}

/// Builds a transaction log that reproduces the given RFM targets exactly
/// when aggregated against `reference`.
///
/// Each customer's transactions all land on `reference - recency_days`
/// (so the recency comes out exactly), and the monetary total is split
/// across `frequency` amounts that sum to the target to the cent. At least
/// one target must have recency 1, so that the reference date derived from
/// the generated log is `reference` itself.
pub fn transactions_for_rfm(targets: &[RfmTarget], reference: NaiveDate) -> Result<Vec<RawTransaction>> {
    if targets.is_empty() {
        return Err(Error::EmptyInput("no RFM targets given".to_string()));
    }
    if targets.iter().all(|t| t.recency_days != 1) {
        return Err(Error::InvalidParam(
            "at least one target needs recency_days = 1, otherwise the log's derived \
             reference date would disagree with the requested one"
                .to_string(),
        ));
    }

    let mut transactions = Vec::new();
    for (t_idx, target) in targets.iter().enumerate() {
        if target.recency_days < 1 {
            return Err(Error::InvalidParam(format!(
                "target {t_idx} ({}): recency must be >= 1, got {}",
                target.customer_id, target.recency_days
            )));
        }
        if target.frequency == 0 {
            return Err(Error::InvalidParam(format!(
                "target {t_idx} ({}): frequency must be >= 1",
                target.customer_id
            )));
        }
        if target.monetary.is_negative() {
            return Err(Error::InvalidParam(format!(
                "target {t_idx} ({}): monetary must be >= 0",
                target.customer_id
            )));
        }
        let day = reference
            .checked_sub_days(Days::new(target.recency_days as u64))
            .ok_or_else(|| {
                Error::InvalidParam(format!(
                    "target {t_idx} ({}): recency {} days reaches before the calendar",
                    target.customer_id, target.recency_days
                ))
            })?;
        let timestamp = day.and_hms_opt(12, 0, 0).expect("noon exists");

        let total = target.monetary.minor();
        let freq = target.frequency as i64;
        let base = total / freq;
        let remainder = total % freq;
        for j in 0..target.frequency {
            let cents = base + if (j as i64) < remainder { 1 } else { 0 };
            transactions.push(RawTransaction {
                card_holder: target.customer_id.clone(),
                transaction_id: format!("t-{}-{j}", target.customer_id),
                amount: Money::from_minor(cents),
                op_date: timestamp,
            });
        }
    }
    Ok(transactions)
}

/// A random but reproducible transaction log: `n_customers` customers,
/// each with `max(1, Poisson(mean_frequency))` transactions on random days
/// in `[start, start + days)` with amounts up to 1000.00.
pub fn random_transactions(
    n_customers: usize,
    mean_frequency: f64,
    start: NaiveDate,
    days: u64,
    seed: u64,
) -> Result<Vec<RawTransaction>> {
    if n_customers == 0 {
        return Err(Error::InvalidParam("need at least one customer".to_string()));
    }
    if !(mean_frequency > 0.0 && mean_frequency.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "mean_frequency must be positive and finite, got {mean_frequency}"
        )));
    }
    if days == 0 {
        return Err(Error::InvalidParam("need a date range of at least one day".to_string()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poisson = Poisson::new(mean_frequency)
        .map_err(|e| Error::InvalidParam(format!("bad Poisson mean: {e}")))?;
    let mut transactions = Vec::new();
    let mut counter = 0usize;
    for c in 0..n_customers {
        let draw: f64 = poisson.sample(&mut rng);
        let frequency = (draw as u64).max(1);
        for _ in 0..frequency {
            let day = start
                .checked_add_days(Days::new(rng.random_range(0..days)))
                .expect("in-range day");
            let second = rng.random_range(0..86_400u32);
            let timestamp = day
                .and_hms_opt(second / 3600, (second / 60) % 60, second % 60)
                .expect("in-range time");
            transactions.push(RawTransaction {
                card_holder: format!("c{c:05}"),
                transaction_id: format!("t{counter:07}"),
                amount: Money::from_minor(rng.random_range(1..=100_000)),
                op_date: timestamp,
            });
            counter += 1;
        }
    }
    Ok(transactions)
}
