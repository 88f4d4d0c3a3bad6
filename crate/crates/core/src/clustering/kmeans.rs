//! Lloyd's k-means with k-means++ seeding, plus elbow analysis for k.
//!
//! Everything is deterministic for a given seed: initialization draws from
//! a counter-based PRNG seeded explicitly, assignment ties break to the
//! lowest centroid index, and restart seeds are derived from the base seed
//! with a fixed mixing function. Fitting the same data with the same seed
//! twice yields bit-identical models.

use std::io::Write;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{sq_dist, stable_sum, PointSet};
use crate::{Error, Result};

/// Iteration controls for [`fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansOptions {
    /// Hard cap on Lloyd iterations.
    pub max_iter: usize,
    /// Convergence threshold on the largest centroid displacement between
    /// consecutive iterations.
    pub tol: f64,
}

impl Default for KMeansOptions {
    fn default() -> KMeansOptions {
        KMeansOptions {
            max_iter: 300,
            tol: 1e-6,
        }
    }
}

/// A fitted k-means model.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    /// Number of centroids requested (clusters may end up empty only when
    /// the data has fewer distinct locations than k).
    pub k: usize,
    /// Final centroids, `k` rows of `dims` coordinates.
    pub centroids: Vec<Vec<f64>>,
    /// Per-point index of the owning centroid.
    pub assignments: Vec<usize>,
    /// Final within-cluster sum of squared distances.
    pub wcss: f64,
    /// WCSS measured at the end of every iteration; non-increasing.
    pub wcss_trace: Vec<f64>,
    /// Iterations actually run.
    pub iterations: usize,
    /// Seed the run was initialized with.
    pub seed: u64,
}

/// SplitMix64 — tiny, well-studied mixer used to derive independent
/// restart seeds from a base seed.
pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed for restart `r` of a run based on `seed`.
fn restart_seed(seed: u64, r: u64) -> u64 {
    splitmix64(seed.wrapping_add(r))
}

/// Fits k-means with k-means++ initialization followed by Lloyd iteration.
///
/// * Assignment ties go to the lowest centroid index.
/// * Convergence: largest centroid displacement `<= tol`, or `max_iter`.
/// * A cluster emptied by reassignment is reseeded to the point currently
///   farthest from its own centroid (skipped when every point already sits
///   exactly on its centroid, in which case the cluster stays empty — the
///   data has fewer distinct locations than k).
///
/// The WCSS trace (evaluated after each iteration's update step) is
/// non-increasing: both Lloyd steps and the reseed rule only ever lower it.
pub fn fit(points: &PointSet, k: usize, seed: u64, options: &KMeansOptions) -> Result<KMeansModel> {
    validate(points, k, options)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let init = plus_plus_init(points, k, &mut rng);
    let run = lloyd(points, init, options);
    Ok(KMeansModel {
        k,
        centroids: run.centroids,
        assignments: run.assignments,
        wcss: run.wcss,
        wcss_trace: run.trace,
        iterations: run.iterations,
        seed,
    })
}

fn validate(points: &PointSet, k: usize, options: &KMeansOptions) -> Result<()> {
    if k == 0 || k > points.len() {
        return Err(Error::InvalidParam(format!(
            "k must lie in 1..={} (number of points), got {k}",
            points.len()
        )));
    }
    if options.max_iter == 0 {
        return Err(Error::InvalidParam("max_iter must be at least 1".to_string()));
    }
    if !(options.tol >= 0.0 && options.tol.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "tol must be finite and non-negative, got {}",
            options.tol
        )));
    }
    Ok(())
}

/// Within-cluster sum of squares for an explicit solution, summed stably.
pub fn wcss(points: &PointSet, centroids: &[Vec<f64>], assignments: &[usize]) -> Result<f64> {
    if assignments.len() != points.len() {
        return Err(Error::InvalidParam(format!(
            "{} assignments for {} points",
            assignments.len(),
            points.len()
        )));
    }
    for (i, &a) in assignments.iter().enumerate() {
        if a >= centroids.len() {
            return Err(Error::InvalidParam(format!(
                "point {i} assigned to centroid {a}, only {} exist",
                centroids.len()
            )));
        }
    }
    Ok(stable_sum(
        (0..points.len()).map(|i| sq_dist(points.point(i), &centroids[assignments[i]])),
    ))
}

/// k-means++ initialization: first centroid uniform, the rest sampled with
/// probability proportional to squared distance from the nearest centroid
/// chosen so far. When every remaining point coincides with a centroid the
/// weights vanish and the draw falls back to uniform.
fn plus_plus_init<R: Rng>(points: &PointSet, k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    let first = rng.random_range(0..n);
    centroids.push(points.point(first).to_vec());

    let mut nearest_sq: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.point(i), &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = nearest_sq.iter().sum();
        let chosen = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut cumulative = 0.0;
            let mut pick = None;
            for (i, &w) in nearest_sq.iter().enumerate() {
                cumulative += w;
                if cumulative > target && w > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave the cumulative walk short of `target`;
            // fall back to the last point with positive weight.
            pick.unwrap_or_else(|| {
                nearest_sq
                    .iter()
                    .rposition(|&w| w > 0.0)
                    .expect("total > 0 implies a positive weight")
            })
        } else {
            rng.random_range(0..n)
        };
        let chosen_coords = points.point(chosen).to_vec();
        for i in 0..n {
            let d = sq_dist(points.point(i), &chosen_coords);
            if d < nearest_sq[i] {
                nearest_sq[i] = d;
            }
        }
        centroids.push(chosen_coords);
    }
    centroids
}

struct LloydRun {
    centroids: Vec<Vec<f64>>,
    assignments: Vec<usize>,
    wcss: f64,
    trace: Vec<f64>,
    iterations: usize,
}

/// Lloyd iteration from explicit starting centroids.
fn lloyd(points: &PointSet, mut centroids: Vec<Vec<f64>>, options: &KMeansOptions) -> LloydRun {
    let n = points.len();
    let k = centroids.len();
    let dims = points.dims();
    let mut assignments = vec![0usize; n];
    let mut trace = Vec::new();
    let mut iterations = 0;

    while iterations < options.max_iter {
        iterations += 1;

        // Assignment: nearest centroid, ties to the lowest index.
        for i in 0..n {
            let p = points.point(i);
            let mut best = 0usize;
            let mut best_d = sq_dist(p, &centroids[0]);
            for (j, c) in centroids.iter().enumerate().skip(1) {
                let d = sq_dist(p, c);
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            assignments[i] = best;
        }

        // Reseed clusters that lost every member: move the point farthest
        // from its current centroid there. Strictly lowers WCSS whenever
        // that distance is positive; otherwise the cluster stays empty.
        let mut counts = vec![0usize; k];
        for &a in &assignments {
            counts[a] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                continue;
            }
            let mut farthest = 0usize;
            let mut farthest_d = -1.0;
            for i in 0..n {
                let d = sq_dist(points.point(i), &centroids[assignments[i]]);
                if d > farthest_d {
                    farthest = i;
                    farthest_d = d;
                }
            }
            if farthest_d <= 0.0 {
                continue;
            }
            counts[assignments[farthest]] -= 1;
            centroids[j] = points.point(farthest).to_vec();
            assignments[farthest] = j;
            counts[j] = 1;
        }

        // Update: each centroid moves to the mean of its members.
        let mut sums = vec![0.0f64; k * dims];
        for i in 0..n {
            let p = points.point(i);
            let base = assignments[i] * dims;
            for d in 0..dims {
                sums[base + d] += p[d];
            }
        }
        let mut max_shift_sq = 0.0f64;
        for j in 0..k {
            if counts[j] == 0 {
                continue; // keep the old centroid; nothing to average
            }
            let mut updated = vec![0.0; dims];
            for d in 0..dims {
                updated[d] = sums[j * dims + d] / counts[j] as f64;
            }
            let shift = sq_dist(&updated, &centroids[j]);
            if shift > max_shift_sq {
                max_shift_sq = shift;
            }
            centroids[j] = updated;
        }

        trace.push(
            wcss(points, &centroids, &assignments).expect("internal solution is consistent"),
        );

        if max_shift_sq.sqrt() <= options.tol {
            break;
        }
    }

    let final_wcss = *trace.last().expect("at least one iteration runs");
    LloydRun {
        centroids,
        assignments,
        wcss: final_wcss,
        trace,
        iterations,
    }
}

/// One `(k, wcss)` sample of an elbow scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowEntry {
    /// Number of clusters fitted.
    pub k: usize,
    /// Best WCSS over all candidates for this k.
    pub wcss: f64,
}

/// Result of [`elbow_curve`]: best WCSS per k plus the suggested knee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElbowCurve {
    /// One entry per k, ascending.
    pub entries: Vec<ElbowEntry>,
    /// The k at which the curve bends hardest (largest discrete second
    /// difference over interior entries). A suggestion, not a verdict —
    /// `None` when fewer than three entries exist.
    pub knee: Option<usize>,
}

/// Scans k over `k_min..=k_max`, fitting `restarts` seeded runs per k and
/// reporting each k's best (lowest) WCSS.
///
/// Each restart slot `r` is an independent lineage: at every k it tries a
/// fresh seeded fit (seed shared across k values) and, for k > k_min, a
/// warm start built from its own previous-k winner's centroids plus the
/// point farthest from them, keeping whichever scatters less. Because a
/// widened centroid set can only reduce scatter, every lineage is
/// non-increasing in k — so the reported minimum is too. And because each
/// lineage never looks at the others, running with more restarts can only
/// add candidates: the curve for `restarts = a + b` lies at or below the
/// curve for `restarts = a` point for point.
pub fn elbow_curve(
    points: &PointSet,
    k_min: usize,
    k_max: usize,
    restarts: usize,
    seed: u64,
    options: &KMeansOptions,
) -> Result<ElbowCurve> {
    if k_min == 0 || k_min > k_max {
        return Err(Error::InvalidParam(format!(
            "need 1 <= k_min <= k_max, got k_min={k_min}, k_max={k_max}"
        )));
    }
    if k_max > points.len() {
        return Err(Error::InvalidParam(format!(
            "k_max={k_max} exceeds the number of points ({})",
            points.len()
        )));
    }
    if restarts == 0 {
        return Err(Error::InvalidParam("restarts must be at least 1".to_string()));
    }

    let mut entries = Vec::new();
    let mut chains: Vec<Option<KMeansModel>> = vec![None; restarts];
    for k in k_min..=k_max {
        for (r, chain) in chains.iter_mut().enumerate() {
            let chain_seed = restart_seed(seed, r as u64);
            let mut next = fit(points, k, chain_seed, options)?;
            if let Some(previous) = chain.as_ref() {
                let init = widen_by_one(points, &previous.centroids);
                let run = lloyd(points, init, options);
                if run.wcss < next.wcss {
                    next = KMeansModel {
                        k,
                        centroids: run.centroids,
                        assignments: run.assignments,
                        wcss: run.wcss,
                        wcss_trace: run.trace,
                        iterations: run.iterations,
                        seed: chain_seed,
                    };
                }
            }
            *chain = Some(next);
        }
        let wcss = chains
            .iter()
            .flatten()
            .map(|model| model.wcss)
            .fold(f64::INFINITY, f64::min);
        entries.push(ElbowEntry { k, wcss });
    }

    let knee = knee_by_second_difference(&entries);
    Ok(ElbowCurve { entries, knee })
}

/// Extends a centroid set with the point farthest from its nearest
/// centroid — the warm-start candidate for k+1.
fn widen_by_one(points: &PointSet, centroids: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut farthest = 0usize;
    let mut farthest_d = -1.0;
    for i in 0..points.len() {
        let p = points.point(i);
        let d = centroids
            .iter()
            .map(|c| sq_dist(p, c))
            .fold(f64::INFINITY, f64::min);
        if d > farthest_d {
            farthest = i;
            farthest_d = d;
        }
    }
    let mut widened = centroids.to_vec();
    widened.push(points.point(farthest).to_vec());
    widened
}

/// Knee: the interior k maximizing `w(k-1) - 2 w(k) + w(k+1)`; ties go to
/// the smallest k.
fn knee_by_second_difference(entries: &[ElbowEntry]) -> Option<usize> {
    if entries.len() < 3 {
        return None;
    }
    let mut best_k = None;
    let mut best_value = f64::NEG_INFINITY;
    for w in entries.windows(3) {
        let value = w[0].wcss - 2.0 * w[1].wcss + w[2].wcss;
        if value > best_value {
            best_value = value;
            best_k = Some(w[1].k);
        }
    }
    best_k
}

/// Writes the elbow scan as CSV: `k,wcss,knee_flag` with the knee row
/// flagged 1.
pub fn write_elbow_csv<W: Write>(writer: W, curve: &ElbowCurve) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["k", "wcss", "knee_flag"])?;
    for e in &curve.entries {
        let flag = if curve.knee == Some(e.k) { "1" } else { "0" };
        w.write_record([e.k.to_string().as_str(), &e.wcss.to_string(), flag])?;
    }
    w.flush()?;
    Ok(())
}
