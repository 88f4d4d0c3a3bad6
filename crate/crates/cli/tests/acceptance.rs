//! Acceptance suite: twelve independently checkable guarantees, one test
//! each. Every test that can be cross-checked carries its own oracle,
//! written from the definition rather than from the library code: a naive
//! per-customer loop for the feature table, a quadratic scan for density
//! clustering, a cubic distance-matrix walk for hierarchical merging.
//! Fixtures are synthetic and seeded, so every run sees identical data.

mod common;

use std::collections::{BTreeMap, VecDeque};
use std::time::{Duration, Instant};

use common::*;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use tempfile::tempdir;

use rfmseg_core::clustering::agglomerative::{self, Linkage};
use rfmseg_core::clustering::dbscan::{self, DbscanParams, PointKind, NOISE};
use rfmseg_core::clustering::kmeans::{self, KMeansOptions};
use rfmseg_core::clustering::{dist, sq_dist, PointSet};
use rfmseg_core::eval::adjusted_rand_index;
use rfmseg_core::ingest::{dedupe, RawTransaction};
use rfmseg_core::money::Money;
use rfmseg_core::pipelines::{run_model1, run_model2, RefineTarget};
use rfmseg_core::rfm::{compute_reference_date, compute_rfm, score_rfm, RfmVector};
use rfmseg_core::synth::{gaussian_blobs, transactions_for_rfm, uniform_points, BlobSpec, RfmTarget};

// --------------------------------------------------------------------
// Shared fixtures
// --------------------------------------------------------------------

/// Exactly 1,000 transactions across 100 customers (10 each), with random
/// recencies and spends, shuffled so input order proves nothing.
fn thousand_transactions() -> Vec<RawTransaction> {
    let mut rng = StdRng::seed_from_u64(41);
    let targets: Vec<RfmTarget> = (0..100)
        .map(|c| RfmTarget {
            customer_id: format!("cust{c:03}"),
            recency_days: if c == 0 { 1 } else { rng.random_range(1..=200) },
            frequency: 10,
            monetary: Money::from_minor(rng.random_range(1_000..=2_000_000)),
        })
        .collect();
    let mut txns = transactions_for_rfm(&targets, reference_date()).unwrap();
    txns.shuffle(&mut rng);
    txns
}

/// Naive per-customer feature computation, straight from the definition:
/// group by holder, count rows, sum amounts in minor units, count whole
/// days from the latest transaction day to the day after the table's
/// newest day.
fn naive_rfm(txns: &[RawTransaction]) -> Vec<RfmVector> {
    let newest = txns.iter().map(|t| t.op_date.date()).max().unwrap();
    let reference = newest.checked_add_days(chrono::Days::new(1)).unwrap();
    let mut per: BTreeMap<&str, (chrono::NaiveDate, u64, i64)> = BTreeMap::new();
    for t in txns {
        let day = t.op_date.date();
        let entry = per.entry(t.card_holder.as_str()).or_insert((day, 0, 0));
        if day > entry.0 {
            entry.0 = day;
        }
        entry.1 += 1;
        entry.2 += t.amount.minor();
    }
    per.into_iter()
        .map(|(id, (last, frequency, minor))| RfmVector {
            customer_id: id.to_string(),
            recency_days: reference.signed_duration_since(last).num_days(),
            frequency,
            monetary: Money::from_minor(minor),
        })
        .collect()
}

/// Four tight Gaussian blobs of 1,000 points each on alternating corners
/// of a cube — far enough apart that "four groups" is the only reasonable
/// reading of the data.
fn four_blobs() -> (PointSet, Vec<usize>) {
    let specs = [
        BlobSpec { center: vec![3.0, 3.0, 3.0], n: 1000, sigma: 0.5 },
        BlobSpec { center: vec![3.0, -3.0, -3.0], n: 1000, sigma: 0.5 },
        BlobSpec { center: vec![-3.0, 3.0, -3.0], n: 1000, sigma: 0.5 },
        BlobSpec { center: vec![-3.0, -3.0, 3.0], n: 1000, sigma: 0.5 },
    ];
    gaussian_blobs(&specs, 77).unwrap()
}

/// Draws `n` points from an isotropic Gaussian, rejecting draws farther
/// than `clip_sigmas` standard deviations from the center. Clipping keeps
/// planted structures free of stray far-out samples, so the fixture's
/// density properties hold by construction instead of by luck.
fn clipped_blob(
    rng: &mut StdRng,
    center: [f64; 3],
    sigma: f64,
    clip_sigmas: f64,
    n: usize,
    values: &mut Vec<f64>,
    truth: &mut Vec<usize>,
    label: usize,
) {
    for _ in 0..n {
        loop {
            let z: [f64; 3] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            if z.iter().map(|v| v * v).sum::<f64>() <= clip_sigmas * clip_sigmas {
                for d in 0..3 {
                    values.push(center[d] + sigma * z[d]);
                }
                truth.push(label);
                break;
            }
        }
    }
}

// --------------------------------------------------------------------
// 1. Feature extraction equals a naive per-customer oracle
// --------------------------------------------------------------------

#[test]
fn criterion_01_rfm_matches_a_naive_per_customer_oracle() {
    let txns = thousand_transactions();
    assert_eq!(txns.len(), 1000);

    let started = Instant::now();
    let reference = compute_reference_date(&txns).unwrap();
    let vectors = compute_rfm(&txns, reference).unwrap();
    let elapsed = started.elapsed();

    let expected = naive_rfm(&txns);
    assert_eq!(vectors.len(), 100);
    assert_eq!(vectors, expected, "library disagrees with the naive loop");
    assert!(
        elapsed < Duration::from_secs(1),
        "feature extraction took {elapsed:?}, expected well under 1s"
    );
}

// --------------------------------------------------------------------
// 2. Conservation: frequencies and spends reconcile exactly
// --------------------------------------------------------------------

#[test]
fn criterion_02_rfm_totals_reconcile_exactly_with_the_input() {
    let mut txns = thousand_transactions();
    // Inject 50 exact duplicate rows; deduplication must cancel them so
    // the totals reconcile against the 1,000 unique transactions.
    let dupes: Vec<RawTransaction> = txns.iter().take(50).cloned().collect();
    txns.extend(dupes);
    txns.shuffle(&mut StdRng::seed_from_u64(99));

    let (kept, dropped) = dedupe(txns);
    assert_eq!(dropped, 50);
    assert_eq!(kept.len(), 1000);
    let total_minor: i64 = kept.iter().map(|t| t.amount.minor()).sum();

    let reference = compute_reference_date(&kept).unwrap();
    let vectors = compute_rfm(&kept, reference).unwrap();

    let frequency_sum: u64 = vectors.iter().map(|v| v.frequency).sum();
    let monetary_sum: i64 = vectors.iter().map(|v| v.monetary.minor()).sum();
    assert_eq!(frequency_sum, 1000, "frequencies must add up to the row count");
    assert_eq!(monetary_sum, total_minor, "spend must reconcile to the cent");
    for v in &vectors {
        assert!(v.recency_days >= 1, "recency is measured from the next day");
    }
}

// --------------------------------------------------------------------
// 3. Quantile scoring: exact distinct-score counts
// --------------------------------------------------------------------

#[test]
fn criterion_03_quantile_scoring_hits_exact_distinct_score_counts() {
    // 125 customers tiling a 5x5x5 attribute grid: 25 customers share each
    // attribute value, so q=5 fills every bin exactly and q=2 still
    // populates both bins on every axis.
    let vectors: Vec<RfmVector> = grid_targets()
        .into_iter()
        .map(|t| RfmVector {
            customer_id: t.customer_id,
            recency_days: t.recency_days,
            frequency: t.frequency,
            monetary: t.monetary,
        })
        .collect();

    let scores = score_rfm(&vectors, 5).unwrap();
    let distinct: std::collections::BTreeSet<&str> =
        scores.iter().map(|s| s.combined.as_str()).collect();
    assert_eq!(distinct.len(), 125, "five bins per axis yield 5^3 distinct scores");
    for s in &scores {
        assert!((1..=5).contains(&s.r_score));
        assert!((1..=5).contains(&s.f_score));
        assert!((1..=5).contains(&s.m_score));
        assert_eq!(s.combined, format!("{}{}{}", s.r_score, s.f_score, s.m_score));
    }

    let coarse = score_rfm(&vectors, 2).unwrap();
    let distinct: std::collections::BTreeSet<&str> =
        coarse.iter().map(|s| s.combined.as_str()).collect();
    assert!(distinct.len() <= 8, "two bins per axis cap the scores at 2^3");
    assert_eq!(distinct.len(), 8, "this fixture populates all eight");
}

// --------------------------------------------------------------------
// 4. Lloyd iterations never increase the objective
// --------------------------------------------------------------------

#[test]
fn criterion_04_lloyd_iterations_never_increase_wcss() {
    for seed in 0..50u64 {
        let points = uniform_points(5000, 3, 0.0, 1.0, 1000 + seed).unwrap();
        let model = kmeans::fit(&points, 8, seed, &KMeansOptions::default()).unwrap();
        assert!(!model.wcss_trace.is_empty());
        assert_eq!(*model.wcss_trace.last().unwrap(), model.wcss);
        for (i, pair) in model.wcss_trace.windows(2).enumerate() {
            assert!(
                pair[1] <= pair[0],
                "seed {seed}: WCSS rose at iteration {}: {} -> {}",
                i + 1,
                pair[0],
                pair[1]
            );
        }
    }
}

// --------------------------------------------------------------------
// 5. The elbow scan recovers the true group count
// --------------------------------------------------------------------

#[test]
fn criterion_05_elbow_recovers_the_true_blob_count() {
    let (points, _) = four_blobs();
    let options = KMeansOptions::default();
    let started = Instant::now();
    let mut hits = 0;
    for seed in 0..20u64 {
        let curve = kmeans::elbow_curve(&points, 1, 10, 5, seed, &options).unwrap();
        for pair in curve.entries.windows(2) {
            assert!(pair[1].wcss <= pair[0].wcss, "curve must be non-increasing");
        }
        if curve.knee == Some(4) {
            hits += 1;
        }
    }
    let elapsed = started.elapsed();
    assert!(hits >= 19, "knee found in only {hits}/20 seeded scans");
    assert!(
        elapsed < Duration::from_secs(10),
        "20 elbow scans took {elapsed:?}, expected under 10s"
    );
}

// --------------------------------------------------------------------
// 6. Density clustering equals a naive quadratic oracle
// --------------------------------------------------------------------

/// Textbook density clustering with brute-force neighborhoods: distances
/// at or below `eps` count (self included), cores need `min_points`
/// neighbors, clusters grow breadth-first from the lowest-index unvisited
/// core, and whichever cluster reaches a border point first keeps it.
fn naive_dbscan(points: &PointSet, eps: f64, min_points: usize) -> (Vec<i32>, Vec<PointKind>) {
    let n = points.len();
    let mut neighborhoods: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if dist(points.point(i), points.point(j)) <= eps {
                neighborhoods[i].push(j);
            }
        }
    }
    let core: Vec<bool> = neighborhoods.iter().map(|nb| nb.len() >= min_points).collect();

    let mut labels = vec![NOISE; n];
    let mut claimed = vec![false; n];
    let mut next_cluster = 0i32;
    for start in 0..n {
        if !core[start] || claimed[start] {
            continue;
        }
        claimed[start] = true;
        labels[start] = next_cluster;
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for &q in &neighborhoods[p] {
                if claimed[q] {
                    continue;
                }
                claimed[q] = true;
                labels[q] = next_cluster;
                if core[q] {
                    queue.push_back(q);
                }
            }
        }
        next_cluster += 1;
    }

    let kinds = (0..n)
        .map(|i| {
            if core[i] {
                PointKind::Core
            } else if labels[i] != NOISE {
                PointKind::Border
            } else {
                PointKind::Noise
            }
        })
        .collect();
    (labels, kinds)
}

#[test]
fn criterion_06_dbscan_matches_a_naive_quadratic_oracle() {
    // Three blobs plus background scatter: a mix of cores, borders and
    // noise, 2,000 points in all.
    let specs = [
        BlobSpec { center: vec![0.0, 0.0, 0.0], n: 600, sigma: 0.4 },
        BlobSpec { center: vec![3.0, 0.0, 0.0], n: 600, sigma: 0.4 },
        BlobSpec { center: vec![0.0, 3.0, 0.0], n: 600, sigma: 0.4 },
    ];
    let (blobs, _) = gaussian_blobs(&specs, 5).unwrap();
    let scatter = uniform_points(200, 3, -2.0, 5.0, 6).unwrap();
    let mut values = blobs.values().to_vec();
    values.extend_from_slice(scatter.values());
    let ids = (0..2000).map(|i| format!("p{i:04}")).collect();
    let points = PointSet::new(ids, values, 3).unwrap();

    let params = DbscanParams { eps: 0.35, min_points: 6 };
    let result = dbscan::fit(&points, &params).unwrap();
    let (expected_labels, expected_kinds) = naive_dbscan(&points, params.eps, params.min_points);

    assert_eq!(result.labels, expected_labels, "labels differ from the oracle");
    assert_eq!(result.kinds, expected_kinds, "kinds differ from the oracle");
    assert!(result.n_clusters >= 3, "fixture should form at least the three blobs");
    assert!(result.noise_count() > 0, "fixture should leave some scatter as noise");

    // Point roles and the partition of core points survive any input
    // order; only border ownership may legitimately change.
    let n = points.len();
    for perm_seed in 0..10u64 {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut StdRng::seed_from_u64(perm_seed));
        let permuted = points.subset(&perm);
        let shuffled = dbscan::fit(&permuted, &params).unwrap();

        let mut original_core_labels = Vec::new();
        let mut permuted_core_labels = Vec::new();
        let mut inverse = vec![0usize; n];
        for (pos, &orig) in perm.iter().enumerate() {
            inverse[orig] = pos;
        }
        for i in 0..n {
            assert_eq!(
                shuffled.kinds[inverse[i]], result.kinds[i],
                "point role changed under permutation {perm_seed}"
            );
            if result.kinds[i] == PointKind::Core {
                original_core_labels.push(result.labels[i]);
                permuted_core_labels.push(shuffled.labels[inverse[i]]);
            }
        }
        let ari = adjusted_rand_index(&original_core_labels, &permuted_core_labels);
        assert_eq!(ari, 1.0, "core partition changed under permutation {perm_seed}");
    }
}

// --------------------------------------------------------------------
// 7. Density model end to end: planted outlier groups come back out
// --------------------------------------------------------------------

#[test]
fn criterion_07_density_model_isolates_planted_outlier_groups() {
    // 950 points in two dense groups, plus 5% planted outliers whose two
    // lumps sit 5.0 apart on the first (recency) axis. Clipping makes the
    // construction exact: no dense point strays into the gap and no
    // outlier lump is dense enough to become a cluster of its own.
    let mut rng = StdRng::seed_from_u64(4242);
    let mut values = Vec::new();
    let mut truth = Vec::new();
    clipped_blob(&mut rng, [0.0, -1.2, 0.0], 0.35, 2.5, 475, &mut values, &mut truth, 0);
    clipped_blob(&mut rng, [0.0, 1.2, 0.0], 0.35, 2.5, 475, &mut values, &mut truth, 1);
    clipped_blob(&mut rng, [-2.5, 0.0, 0.0], 0.45, 2.0, 25, &mut values, &mut truth, 2);
    clipped_blob(&mut rng, [2.5, 0.0, 0.0], 0.45, 2.0, 25, &mut values, &mut truth, 3);
    let ids = (0..1000).map(|i| format!("z{i:04}")).collect();
    let points = PointSet::new(ids, values, 3).unwrap();

    // Choose density parameters by sweeping, as a user would: among the
    // settings that find the two dense groups, keep the one that explains
    // the most data as structure (least noise).
    let rows = dbscan::param_sweep(&points, &[0.3, 0.4, 0.5], &[10]).unwrap();
    let picked = rows
        .iter()
        .filter(|r| r.clusters == 2 && r.noise_fraction > 0.0)
        .min_by(|a, b| a.noise_fraction.total_cmp(&b.noise_fraction))
        .expect("sweep must offer a two-cluster parameterization with noise");
    assert!(
        (picked.noise_fraction - 0.05).abs() < 1e-12,
        "exactly the planted 5% should be noise, got {}",
        picked.noise_fraction
    );

    let params = DbscanParams { eps: picked.eps, min_points: picked.min_points };
    let set = run_model2(&points, &params, 2, 31337, &KMeansOptions::default()).unwrap();

    assert_eq!(set.segments.len(), 4, "two dense + two extreme segments");
    let extreme: Vec<_> = set.segments.iter().filter(|s| s.is_extreme()).collect();
    let dense: Vec<_> = set.segments.iter().filter(|s| !s.is_extreme()).collect();
    assert_eq!(extreme.len(), 2);
    assert_eq!(dense.len(), 2);
    let mut dense_sizes: Vec<usize> = dense.iter().map(|s| s.size()).collect();
    let mut extreme_sizes: Vec<usize> = extreme.iter().map(|s| s.size()).collect();
    dense_sizes.sort_unstable();
    extreme_sizes.sort_unstable();
    assert_eq!(dense_sizes, [475, 475]);
    assert_eq!(extreme_sizes, [25, 25]);

    // The two extreme groups must sit where they were planted: mean
    // recency difference within 15% of the constructed gap of 5.0.
    let gap = (extreme[0].centroid_std[0] - extreme[1].centroid_std[0]).abs();
    assert!(
        (4.25..=5.75).contains(&gap),
        "extreme recency gap {gap} strays more than 15% from 5.0"
    );

    let assignment = set.assignment().unwrap();
    let ari = adjusted_rand_index(&truth, &assignment);
    assert!(ari >= 0.9, "agreement with planted truth too low: {ari}");
}

// --------------------------------------------------------------------
// 8. Two-stage model end to end: five planted groups come back out
// --------------------------------------------------------------------

#[test]
fn criterion_08_two_stage_model_recovers_five_planted_groups() {
    // Three tight blobs plus one group that is bimodal along the first
    // (recency) axis. A four-way first pass groups the two lumps
    // together; the spread-based refinement stage must split exactly that
    // group, recovering all five planted clusters.
    let specs = [
        BlobSpec { center: vec![0.0, 4.0, 0.0], n: 200, sigma: 0.3 },
        BlobSpec { center: vec![0.0, 0.0, 4.0], n: 200, sigma: 0.3 },
        BlobSpec { center: vec![0.0, -4.0, 0.0], n: 200, sigma: 0.3 },
        BlobSpec { center: vec![-2.0, 0.0, -4.0], n: 100, sigma: 0.3 },
        BlobSpec { center: vec![2.0, 0.0, -4.0], n: 100, sigma: 0.3 },
    ];
    let (points, truth) = gaussian_blobs(&specs, 8).unwrap();

    let set = run_model1(
        &points,
        4,
        2,
        RefineTarget::MaxRecencySpread,
        1234,
        &KMeansOptions::default(),
    )
    .unwrap();

    assert_eq!(set.segments.len(), 5, "4 base segments with one split in two");
    let assignment = set.assignment().unwrap();
    let ari = adjusted_rand_index(&truth, &assignment);
    assert!(ari >= 0.9, "agreement with planted truth too low: {ari}");

    // Exactly two segments descend from the refinement pass.
    let refined = set
        .segments
        .iter()
        .filter(|s| s.provenance.len() == 2)
        .count();
    assert_eq!(refined, 2);
}

// --------------------------------------------------------------------
// 9. Hierarchical merging equals a naive cubic oracle
// --------------------------------------------------------------------

/// Inter-cluster distance computed from scratch off the raw points — no
/// recurrences, no caching. Ward's value is the (root of the) growth in
/// within-cluster scatter, computable directly from sizes and centroids.
fn naive_cluster_distance(points: &PointSet, a: &[usize], b: &[usize], linkage: Linkage) -> f64 {
    match linkage {
        Linkage::Single => {
            let mut best = f64::INFINITY;
            for &i in a {
                for &j in b {
                    best = best.min(dist(points.point(i), points.point(j)));
                }
            }
            best
        }
        Linkage::Complete => {
            let mut worst = 0.0f64;
            for &i in a {
                for &j in b {
                    worst = worst.max(dist(points.point(i), points.point(j)));
                }
            }
            worst
        }
        Linkage::Average => {
            let mut sum = 0.0;
            for &i in a {
                for &j in b {
                    sum += dist(points.point(i), points.point(j));
                }
            }
            sum / (a.len() * b.len()) as f64
        }
        Linkage::Ward => {
            let centroid = |members: &[usize]| -> Vec<f64> {
                let mut c = vec![0.0; points.dims()];
                for &i in members {
                    for (d, v) in points.point(i).iter().enumerate() {
                        c[d] += v;
                    }
                }
                for v in &mut c {
                    *v /= members.len() as f64;
                }
                c
            };
            let (na, nb) = (a.len() as f64, b.len() as f64);
            let merged_growth = 2.0 * na * nb / (na + nb) * sq_dist(&centroid(a), &centroid(b));
            merged_growth.sqrt()
        }
    }
}

/// Full greedy merge schedule by exhaustive search: at every step, rescan
/// all active cluster pairs and merge the closest, breaking ties toward
/// the pair with the smallest node ids.
fn naive_merge_schedule(points: &PointSet, linkage: Linkage) -> Vec<(usize, usize, f64, usize)> {
    let n = points.len();
    // (node id, members)
    let mut active: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::with_capacity(n - 1);
    for step in 0..n - 1 {
        let mut best: Option<(f64, usize, usize)> = None; // (d, lo node, hi node)
        for x in 0..active.len() {
            for y in x + 1..active.len() {
                let d = naive_cluster_distance(points, &active[x].1, &active[y].1, linkage);
                let lo = active[x].0.min(active[y].0);
                let hi = active[x].0.max(active[y].0);
                let candidate = (d, lo, hi);
                if best.is_none_or(|b| candidate < b) {
                    best = Some(candidate);
                }
            }
        }
        let (d, lo, hi) = best.unwrap();
        let pos_hi = active.iter().position(|(id, _)| *id == hi).unwrap();
        let (_, members_hi) = active.remove(pos_hi);
        let pos_lo = active.iter().position(|(id, _)| *id == lo).unwrap();
        active[pos_lo].1.extend(members_hi);
        active[pos_lo].0 = n + step;
        merges.push((lo, hi, d, active[pos_lo].1.len()));
    }
    merges
}

#[test]
fn criterion_09_agglomerative_matches_a_naive_cubic_oracle() {
    let points = uniform_points(64, 3, 0.0, 10.0, 31).unwrap();
    for linkage in [Linkage::Single, Linkage::Complete, Linkage::Average, Linkage::Ward] {
        let (_, tree) = agglomerative::fit(&points, 1, linkage, 64).unwrap();
        let expected = naive_merge_schedule(&points, linkage);
        assert_eq!(tree.merges.len(), 63);
        assert_eq!(expected.len(), 63);

        for (t, (merge, naive)) in tree.merges.iter().zip(&expected).enumerate() {
            assert_eq!(
                (merge.left, merge.right, merge.size),
                (naive.0, naive.1, naive.3),
                "{linkage:?}: merge {t} structure differs from the oracle"
            );
            let scale = naive.2.abs().max(1e-12);
            assert!(
                (merge.height - naive.2).abs() <= 1e-9 * scale,
                "{linkage:?}: merge {t} height {} vs oracle {}",
                merge.height,
                naive.2
            );
        }
        for (t, pair) in tree.merges.windows(2).enumerate() {
            assert!(
                pair[1].height >= pair[0].height,
                "{linkage:?}: heights decreased at merge {}",
                t + 1
            );
        }
    }
}

// --------------------------------------------------------------------
// 10. Hierarchical and k-means read the same structure the same way
// --------------------------------------------------------------------

#[test]
fn criterion_10_hierarchical_and_kmeans_agree_on_separated_blobs() {
    let (points, _) = four_blobs();
    let n = points.len();
    let (ward_labels, _) = agglomerative::fit(&points, 4, Linkage::Ward, n).unwrap();

    let options = KMeansOptions::default();
    let best = (0..5)
        .map(|r| kmeans::fit(&points, 4, 500 + r, &options).unwrap())
        .min_by(|a, b| a.wcss.total_cmp(&b.wcss))
        .unwrap();

    let ari = adjusted_rand_index(&ward_labels, &best.assignments);
    assert!(ari >= 0.9, "hierarchical vs k-means agreement too low: {ari}");
}

// --------------------------------------------------------------------
// 11. Runtime scaling stays within documented bounds
// --------------------------------------------------------------------

/// Smallest elapsed time of three runs of `f` — the repeatable part of
/// the cost, with scheduler noise mostly filtered out.
fn min_elapsed_of_three(mut f: impl FnMut()) -> Duration {
    (0..3)
        .map(|_| {
            let t = Instant::now();
            f();
            t.elapsed()
        })
        .min()
        .unwrap()
}

#[test]
fn criterion_11_runtime_scaling_stays_within_documented_bounds() {
    // K-means: per-iteration cost is linear in n at fixed k and d, so
    // doubling n should keep the per-iteration ratio near 2.
    let options = KMeansOptions { max_iter: 20, tol: 0.0 };
    let small = uniform_points(20_000, 3, 0.0, 1.0, 9001).unwrap();
    let large = uniform_points(40_000, 3, 0.0, 1.0, 9002).unwrap();
    let mut iters = [0usize; 2];
    let t_small = min_elapsed_of_three(|| {
        iters[0] = kmeans::fit(&small, 8, 1, &options).unwrap().iterations;
    });
    let t_large = min_elapsed_of_three(|| {
        iters[1] = kmeans::fit(&large, 8, 1, &options).unwrap().iterations;
    });
    let per_iter_small = t_small.as_secs_f64() / iters[0] as f64;
    let per_iter_large = t_large.as_secs_f64() / iters[1] as f64;
    let ratio = per_iter_large / per_iter_small;
    assert!(
        ratio <= 2.5,
        "k-means per-iteration time grew {ratio:.2}x when n doubled (expected ~2x)"
    );

    // Density clustering: at constant density (box side grows with the
    // cube root of n), spatial indexing keeps doubling well below the
    // quadratic 4x.
    let params = DbscanParams { eps: 1.0, min_points: 5 };
    let side = |n: usize| (n as f64 / 2.0).cbrt();
    let d_small = uniform_points(10_000, 3, 0.0, side(10_000), 9003).unwrap();
    let d_large = uniform_points(20_000, 3, 0.0, side(20_000), 9004).unwrap();
    let t_small = min_elapsed_of_three(|| {
        dbscan::fit(&d_small, &params).unwrap();
    });
    let t_large = min_elapsed_of_three(|| {
        dbscan::fit(&d_large, &params).unwrap();
    });
    let ratio = t_large.as_secs_f64() / t_small.as_secs_f64();
    assert!(
        ratio < 3.0,
        "density clustering time grew {ratio:.2}x when n doubled (expected sub-quadratic)"
    );

    // Hierarchical clustering refuses oversized inputs up front, naming
    // the configured cap and the growth rates that motivate it.
    let too_big = uniform_points(60, 3, 0.0, 1.0, 9005).unwrap();
    let err = agglomerative::fit(&too_big, 2, Linkage::Ward, 50).unwrap_err();
    let message = err.to_string();
    assert!(message.contains("exceeds the cap of 50"), "got: {message}");
    assert!(message.contains("O(n^3)"), "got: {message}");
    assert!(message.contains("O(n^2)"), "got: {message}");
}

// --------------------------------------------------------------------
// 12. Segment runs re-run from their manifest byte-for-byte
// --------------------------------------------------------------------

#[test]
fn criterion_12_segment_reruns_from_manifest_are_bit_identical() {
    let dir = tempdir().unwrap();
    write_targets_csv(&dir.path().join("txns.csv"), &corner_targets(30));

    run_in(
        dir.path(),
        &[
            "segment", "--input", "txns.csv", "--out-dir", "first", "--model", "3",
            "--n-clusters", "4", "--seed", "2024",
        ],
    )
    .assert_ok();

    let rerun = run_in(
        dir.path(),
        &["segment", "--from-manifest", "first/manifest.json", "--out-dir", "second"],
    );
    rerun.assert_ok();
    assert!(
        rerun.stdout.contains("reproduced 4 output files bit-identically"),
        "stdout:\n{}",
        rerun.stdout
    );
    for name in ["segments.csv", "scatter.csv", "segments.json", "dendrogram.json"] {
        assert_same_bytes(
            &dir.path().join("first").join(name),
            &dir.path().join("second").join(name),
        );
    }
}
