//! End-to-end segmentation pipelines and segment bookkeeping.
//!
//! A [`SegmentSet`] is a partition of the customer points into numbered
//! segments, each carrying its provenance — the chain of clustering steps
//! that produced it (`"kmeans:2"`, `"dbscan:noise"`, ...) — so a segment
//! like "outliers, then split by k-means" remains explainable after the
//! fact.
//!
//! Three ready-made pipelines:
//!
//! * [`run_model1`] — k-means base segmentation, then one segment (chosen
//!   explicitly or by largest recency spread) refined with a second
//!   k-means.
//! * [`run_model2`] — DBSCAN for the dense majority, then k-means over the
//!   noise points to form explicit outlier segments.
//! * [`run_model3`] — agglomerative hierarchical clustering, keeping the
//!   merge tree for dendrogram export.
//!
//! [`refine`] is the generic building block behind models 1 and 2: it
//! re-clusters one segment in place and renumbers. [`label_segments`]
//! attaches human-readable descriptions derived from raw-unit centroids.

use serde::{Deserialize, Serialize};

use crate::clustering::agglomerative::{self, Linkage, MergeTree};
use crate::clustering::dbscan::{self, DbscanParams};
use crate::clustering::kmeans::{self, KMeansOptions};
use crate::clustering::PointSet;
use crate::rfm::RfmVector;
use crate::{Error, Result};

/// One customer segment: members, geometry, and how it came to be.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Segment {
    /// Segment id within its set, `0..set.len()`.
    pub id: usize,
    /// Point indices belonging to this segment (ascending).
    pub member_indices: Vec<usize>,
    /// Mean of members in the standardized feature space.
    pub centroid_std: Vec<f64>,
    /// Mean of members in raw feature units (recency days, transaction
    /// count, spend); filled by [`label_segments`].
    pub centroid_raw: Option<Vec<f64>>,
    /// Clustering steps that produced this segment, outermost first, e.g.
    /// `["dbscan:noise", "kmeans:1"]`.
    pub provenance: Vec<String>,
    /// Human-readable description; filled by [`label_segments`].
    pub label: Option<SegmentLabel>,
}

impl Segment {
    /// Number of members.
    pub fn size(&self) -> usize {
        self.member_indices.len()
    }

    /// True when any step of this segment's history marks it as made of
    /// density outliers.
    pub fn is_extreme(&self) -> bool {
        self.provenance.iter().any(|p| p == "dbscan:noise")
    }
}

/// A partition of all points into segments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegmentSet {
    /// Segments, indexed by their `id`.
    pub segments: Vec<Segment>,
    /// Total number of points partitioned.
    pub n_points: usize,
}

impl SegmentSet {
    /// Builds a set from per-point cluster labels (`0..k`, every cluster
    /// nonempty) and a provenance naming function.
    fn from_labels(
        points: &PointSet,
        labels: &[usize],
        provenance: impl Fn(usize) -> Vec<String>,
    ) -> SegmentSet {
        let k = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            members[l].push(i);
        }
        let segments = members
            .into_iter()
            .enumerate()
            .map(|(id, member_indices)| Segment {
                centroid_std: mean_point(points, &member_indices),
                id,
                member_indices,
                centroid_raw: None,
                provenance: provenance(id),
                label: None,
            })
            .collect();
        SegmentSet {
            segments,
            n_points: points.len(),
        }
    }

    /// Number of segments.
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    /// True when no segments exist (never for pipeline outputs).
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Per-point segment id. Fails if the segments do not exactly
    /// partition the points.
    pub fn assignment(&self) -> Result<Vec<usize>> {
        let mut out = vec![usize::MAX; self.n_points];
        for segment in &self.segments {
            for &i in &segment.member_indices {
                if i >= self.n_points {
                    return Err(Error::Malformed(format!(
                        "segment {} references point {i}, set has {}",
                        segment.id, self.n_points
                    )));
                }
                if out[i] != usize::MAX {
                    return Err(Error::Malformed(format!(
                        "point {i} belongs to segments {} and {}",
                        out[i], segment.id
                    )));
                }
                out[i] = segment.id;
            }
        }
        if let Some(orphan) = out.iter().position(|&s| s == usize::MAX) {
            return Err(Error::Malformed(format!("point {orphan} belongs to no segment")));
        }
        Ok(out)
    }

    /// Checks structural soundness: ids are `0..len`, members ascending,
    /// and the segments partition all points.
    pub fn validate(&self) -> Result<()> {
        for (expect, segment) in self.segments.iter().enumerate() {
            if segment.id != expect {
                return Err(Error::Malformed(format!(
                    "segment at position {expect} has id {}",
                    segment.id
                )));
            }
            if segment.member_indices.is_empty() {
                return Err(Error::Malformed(format!("segment {} has no members", segment.id)));
            }
            if !segment.member_indices.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Malformed(format!(
                    "segment {} members are not strictly ascending",
                    segment.id
                )));
            }
        }
        self.assignment().map(|_| ())
    }
}

/// Mean of the chosen points, coordinate-wise. Empty member lists never
/// reach this (segments are nonempty by construction).
fn mean_point(points: &PointSet, members: &[usize]) -> Vec<f64> {
    let dims = points.dims();
    let mut mean = vec![0.0; dims];
    for &i in members {
        for (d, m) in mean.iter_mut().enumerate() {
            *m += points.point(i)[d];
        }
    }
    for m in mean.iter_mut() {
        *m /= members.len() as f64;
    }
    mean
}

/// Deterministic per-stage seed derivation, so composed pipelines and
/// stand-alone re-runs of a stage agree on sub-seeds.
pub fn stage_seed(seed: u64, stage: &str) -> u64 {
    // FNV-1a over the stage name, mixed with the base seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in stage.bytes() {
        h ^= u64::from(byte);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    crate::clustering::kmeans::splitmix64(seed ^ h)
}

/// How [`run_model1`] picks the segment to refine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineTarget {
    /// The segment whose members spread widest along the recency axis
    /// (largest population variance of coordinate 0); ties take the lower
    /// segment id.
    MaxRecencySpread,
    /// An explicit segment id.
    Id(usize),
}

/// Resolves a [`RefineTarget`] against a concrete segment set.
pub fn resolve_refine_target(
    target: RefineTarget,
    set: &SegmentSet,
    points: &PointSet,
) -> Result<usize> {
    match target {
        RefineTarget::Id(id) => {
            if id >= set.len() {
                return Err(Error::SegmentNotFound {
                    id,
                    count: set.len(),
                });
            }
            Ok(id)
        }
        RefineTarget::MaxRecencySpread => {
            let mut best = 0usize;
            let mut best_var = f64::NEG_INFINITY;
            for segment in &set.segments {
                let mean = segment
                    .member_indices
                    .iter()
                    .map(|&i| points.point(i)[0])
                    .sum::<f64>()
                    / segment.size() as f64;
                let var = segment
                    .member_indices
                    .iter()
                    .map(|&i| (points.point(i)[0] - mean).powi(2))
                    .sum::<f64>()
                    / segment.size() as f64;
                if var > best_var {
                    best_var = var;
                    best = segment.id;
                }
            }
            Ok(best)
        }
    }
}

/// The sub-clustering a [`refine`] call applies to its target segment.
#[derive(Debug, Clone, PartialEq)]
pub enum RefineMethod {
    /// k-means with this k.
    KMeans {
        /// Number of sub-clusters.
        k: usize,
    },
    /// DBSCAN; its noise points (if any) form one sub-segment tagged
    /// `dbscan:noise`.
    Dbscan {
        /// Neighbourhood radius.
        eps: f64,
        /// Core threshold.
        min_points: usize,
    },
    /// Agglomerative with this cut and linkage.
    Agglomerative {
        /// Number of sub-clusters.
        n_clusters: usize,
        /// Linkage rule.
        linkage: Linkage,
    },
}

/// Re-clusters one segment and splices the parts back into the set.
///
/// Surviving segments keep their relative order (ids compacted to close
/// the gap); the new sub-segments are appended after them in sub-cluster
/// order, each extending the parent's provenance with its own step. Labels
/// are dropped from the result — relabel after refining.
///
/// When the sub-clustering produces a single nonempty part there is
/// nothing to split: the input set is returned unchanged (same ids, same
/// provenance — refining with `k = 1` is the identity).
pub fn refine(
    set: &SegmentSet,
    points: &PointSet,
    target: usize,
    method: &RefineMethod,
    seed: u64,
    options: &KMeansOptions,
) -> Result<SegmentSet> {
    if target >= set.len() {
        return Err(Error::SegmentNotFound {
            id: target,
            count: set.len(),
        });
    }
    let parent = &set.segments[target];
    let sub_points = points.subset(&parent.member_indices);

    // Sub-cluster the target's members. `parts` pairs each provenance tag
    // with member indices *into the parent's member list*.
    let mut parts: Vec<(String, Vec<usize>)> = Vec::new();
    match method {
        RefineMethod::KMeans { k } => {
            let model = kmeans::fit(&sub_points, *k, seed, options)?;
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); *k];
            for (i, &a) in model.assignments.iter().enumerate() {
                members[a].push(i);
            }
            for (c, m) in members.into_iter().enumerate() {
                if !m.is_empty() {
                    parts.push((format!("kmeans:{c}"), m));
                }
            }
        }
        RefineMethod::Dbscan { eps, min_points } => {
            let result = dbscan::fit(
                &sub_points,
                &DbscanParams {
                    eps: *eps,
                    min_points: *min_points,
                },
            )?;
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); result.n_clusters];
            let mut noise = Vec::new();
            for (i, &l) in result.labels.iter().enumerate() {
                if l == dbscan::NOISE {
                    noise.push(i);
                } else {
                    members[l as usize].push(i);
                }
            }
            for (c, m) in members.into_iter().enumerate() {
                parts.push((format!("dbscan:{c}"), m));
            }
            if !noise.is_empty() {
                parts.push(("dbscan:noise".to_string(), noise));
            }
        }
        RefineMethod::Agglomerative { n_clusters, linkage } => {
            // The segment was already admitted into memory; its size is
            // bounded by the original input's cap, so pass it through.
            let (labels, _) = agglomerative::fit(&sub_points, *n_clusters, *linkage, sub_points.len())?;
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_clusters.to_owned()];
            for (i, &l) in labels.iter().enumerate() {
                members[l].push(i);
            }
            for (c, m) in members.into_iter().enumerate() {
                parts.push((format!("agglomerative:{c}"), m));
            }
        }
    }

    if parts.len() <= 1 {
        return Ok(set.clone());
    }

    // Survivors first, in their original order, with compacted ids…
    let mut segments: Vec<Segment> = Vec::with_capacity(set.len() - 1 + parts.len());
    for segment in &set.segments {
        if segment.id == target {
            continue;
        }
        let mut kept = segment.clone();
        kept.id = segments.len();
        kept.label = None;
        segments.push(kept);
    }
    // …then the new parts, translated back to whole-set point indices.
    for (tag, local_members) in parts {
        let member_indices: Vec<usize> = local_members
            .iter()
            .map(|&local| parent.member_indices[local])
            .collect();
        let mut provenance = parent.provenance.clone();
        provenance.push(tag);
        segments.push(Segment {
            id: segments.len(),
            centroid_std: mean_point(points, &member_indices),
            member_indices,
            centroid_raw: None,
            provenance,
            label: None,
        });
    }

    let refined = SegmentSet {
        segments,
        n_points: set.n_points,
    };
    debug_assert!(refined.validate().is_ok());
    Ok(refined)
}

/// Model 1: k-means into `k1` segments, then refine one of them (picked by
/// `target`) into `k2` sub-segments with a second k-means. Yields
/// `k1 + k2 - 1` segments for `k2 >= 2`, or the base `k1` when `k2 = 1`.
pub fn run_model1(
    points: &PointSet,
    k1: usize,
    k2: usize,
    target: RefineTarget,
    seed: u64,
    options: &KMeansOptions,
) -> Result<SegmentSet> {
    let base = kmeans::fit(points, k1, seed, options)?;
    let set = SegmentSet::from_labels(points, &base.assignments, |id| vec![format!("kmeans:{id}")]);
    let target_id = resolve_refine_target(target, &set, points)?;
    if k2 == 1 {
        return Ok(set);
    }
    refine(
        &set,
        points,
        target_id,
        &RefineMethod::KMeans { k: k2 },
        stage_seed(seed, &format!("refine:{target_id}")),
        options,
    )
}

/// Model 2: DBSCAN carves out the dense segments; the noise points are
/// then split into `k_outliers` explicit outlier segments by k-means.
/// Dense segments come first (in cluster order), outlier segments after.
///
/// Fails with [`Error::Degenerate`] when DBSCAN leaves fewer than
/// `k_outliers` noise points — that data has no outlier structure to
/// segment, and silently returning fewer segments would mask it.
pub fn run_model2(
    points: &PointSet,
    params: &DbscanParams,
    k_outliers: usize,
    seed: u64,
    options: &KMeansOptions,
) -> Result<SegmentSet> {
    if k_outliers == 0 {
        return Err(Error::InvalidParam("k_outliers must be at least 1".to_string()));
    }
    let result = dbscan::fit(points, params)?;
    let noise = result.noise_count();
    if noise < k_outliers {
        return Err(Error::Degenerate(format!(
            "DBSCAN (eps={}, min_points={}) marked {noise} points as noise; cannot form \
             {k_outliers} outlier segments — widen the parameter sweep or lower k_outliers",
            params.eps, params.min_points
        )));
    }

    // Dense clusters in id order, then all noise as one trailing segment…
    let labels: Vec<usize> = result
        .labels
        .iter()
        .map(|&l| {
            if l == dbscan::NOISE {
                result.n_clusters
            } else {
                l as usize
            }
        })
        .collect();
    let n_clusters = result.n_clusters;
    let set = SegmentSet::from_labels(points, &labels, |id| {
        if id == n_clusters {
            vec!["dbscan:noise".to_string()]
        } else {
            vec![format!("dbscan:{id}")]
        }
    });

    // …then split the noise segment into the outlier segments.
    refine(
        &set,
        points,
        n_clusters,
        &RefineMethod::KMeans { k: k_outliers },
        stage_seed(seed, "outliers"),
        options,
    )
}

/// Model 3: agglomerative hierarchical clustering cut at `n_clusters`,
/// returning the segments and the full merge tree for dendrogram export.
pub fn run_model3(
    points: &PointSet,
    n_clusters: usize,
    linkage: Linkage,
    size_cap: usize,
) -> Result<(SegmentSet, MergeTree)> {
    let (labels, tree) = agglomerative::fit(points, n_clusters, linkage, size_cap)?;
    let set = SegmentSet::from_labels(points, &labels, |id| vec![format!("agglomerative:{id}")]);
    Ok((set, tree))
}

/// Human-readable traits of a segment, derived from its raw-unit centroid
/// relative to the whole population.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentLabel {
    /// Centroid recency at or below the population median.
    pub active: bool,
    /// Centroid frequency at or above the population median.
    pub frequency_high: bool,
    /// Centroid spend at or above the population's 90th percentile.
    pub spend_high: bool,
    /// Segment descends from density-scan noise.
    pub extreme: bool,
    /// Rendered description, a pure function of the four flags.
    pub text: String,
}

/// Renders the fixed description for a flag combination.
fn label_text(active: bool, frequency_high: bool, spend_high: bool, extreme: bool) -> String {
    let activity = if active { "active" } else { "inactive" };
    let buying = if frequency_high { "buy often" } else { "buy rarely" };
    let spending = if spend_high { "spend heavily" } else { "spend modestly" };
    let mut text = format!("Customers who are {activity}, {buying}, and {spending}");
    if extreme {
        text.push_str(" (outlier group)");
    }
    text
}

/// Nearest-rank percentile of a nonempty sorted slice (`p` in `[0, 1]`).
fn percentile_nearest_rank(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Attaches labels (and raw-unit centroids) to every segment.
///
/// Thresholds come from the whole customer population in raw units,
/// using nearest-rank order statistics: a segment is *active* when its
/// centroid recency is at or below the median recency, *frequent* when its
/// centroid frequency is at or above the median, *high-spend* when its
/// centroid spend is at or above the 90th percentile, and *extreme* when
/// its provenance descends from density-scan noise. `vectors` must align
/// 1:1 with the point indices the set was built over.
pub fn label_segments(set: &mut SegmentSet, vectors: &[RfmVector]) -> Result<()> {
    if vectors.len() != set.n_points {
        return Err(Error::InvalidParam(format!(
            "{} RFM vectors for a segment set over {} points",
            vectors.len(),
            set.n_points
        )));
    }

    let mut recency: Vec<f64> = vectors.iter().map(|v| v.recency_days as f64).collect();
    let mut frequency: Vec<f64> = vectors.iter().map(|v| v.frequency as f64).collect();
    let mut monetary: Vec<f64> = vectors.iter().map(|v| v.monetary.to_f64()).collect();
    recency.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    frequency.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    monetary.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let median_recency = percentile_nearest_rank(&recency, 0.5);
    let median_frequency = percentile_nearest_rank(&frequency, 0.5);
    let spend_p90 = percentile_nearest_rank(&monetary, 0.9);

    for segment in set.segments.iter_mut() {
        let n = segment.size() as f64;
        let mut centroid = [0.0f64; 3];
        for &i in &segment.member_indices {
            centroid[0] += vectors[i].recency_days as f64;
            centroid[1] += vectors[i].frequency as f64;
            centroid[2] += vectors[i].monetary.to_f64();
        }
        for c in centroid.iter_mut() {
            *c /= n;
        }

        let active = centroid[0] <= median_recency;
        let frequency_high = centroid[1] >= median_frequency;
        let spend_high = centroid[2] >= spend_p90;
        let extreme = segment.is_extreme();
        segment.centroid_raw = Some(centroid.to_vec());
        segment.label = Some(SegmentLabel {
            active,
            frequency_high,
            spend_high,
            extreme,
            text: label_text(active, frequency_high, spend_high, extreme),
        });
    }
    Ok(())
}

/// Writes the per-customer segment CSV: `customer_id,segment_id,label_text`
/// in point order. Unlabelled segments write an empty label column.
pub fn write_segments_csv<W: std::io::Write>(
    writer: W,
    set: &SegmentSet,
    customer_ids: &[String],
) -> Result<()> {
    if customer_ids.len() != set.n_points {
        return Err(Error::InvalidParam(format!(
            "{} customer ids for a segment set over {} points",
            customer_ids.len(),
            set.n_points
        )));
    }
    let assignment = set.assignment()?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["customer_id", "segment_id", "label_text"])?;
    for (i, id) in customer_ids.iter().enumerate() {
        let segment = &set.segments[assignment[i]];
        let text = segment.label.as_ref().map_or("", |l| l.text.as_str());
        w.write_record([id.as_str(), &segment.id.to_string(), text])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the plotting CSV: `recency,frequency,monetary,segment_id`, one
/// row per customer in point order, raw units.
pub fn write_scatter_csv<W: std::io::Write>(
    writer: W,
    set: &SegmentSet,
    vectors: &[RfmVector],
) -> Result<()> {
    if vectors.len() != set.n_points {
        return Err(Error::InvalidParam(format!(
            "{} RFM vectors for a segment set over {} points",
            vectors.len(),
            set.n_points
        )));
    }
    let assignment = set.assignment()?;
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["recency", "frequency", "monetary", "segment_id"])?;
    for (i, v) in vectors.iter().enumerate() {
        w.write_record([
            v.recency_days.to_string().as_str(),
            &v.frequency.to_string(),
            &v.monetary.to_string(),
            &assignment[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::adjusted_rand_index;
    use crate::money::Money;
    use crate::synth::{gaussian_blobs, BlobSpec};

    fn options() -> KMeansOptions {
        KMeansOptions::default()
    }

    fn rfm_vector(id: &str, recency: i64, frequency: u64, cents: i64) -> RfmVector {
        RfmVector {
            customer_id: id.to_string(),
            recency_days: recency,
            frequency,
            monetary: Money::from_minor(cents),
        }
    }

    #[test]
    fn stage_seeds_differ_by_stage_and_are_stable() {
        assert_eq!(stage_seed(42, "refine:1"), stage_seed(42, "refine:1"));
        assert_ne!(stage_seed(42, "refine:1"), stage_seed(42, "refine:2"));
        assert_ne!(stage_seed(42, "refine:1"), stage_seed(43, "refine:1"));
        assert_ne!(stage_seed(42, "outliers"), stage_seed(42, "refine:0"));
    }

    #[test]
    fn refine_splices_parts_and_renumbers() {
        // Three obvious blobs; blob 1 is itself two lumps.
        let (points, _) = gaussian_blobs(
            &[
                BlobSpec { center: vec![0.0, 0.0], n: 30, sigma: 0.2 },
                BlobSpec { center: vec![10.0, 0.0], n: 20, sigma: 0.2 },
                BlobSpec { center: vec![10.0, 4.0], n: 20, sigma: 0.2 },
                BlobSpec { center: vec![0.0, 10.0], n: 30, sigma: 0.2 },
            ],
            5,
        )
        .unwrap();

        // k = 3 lumps blobs 1&2 together (they're closest).
        let base = kmeans::fit(&points, 3, 11, &options()).unwrap();
        let set = SegmentSet::from_labels(&points, &base.assignments, |id| vec![format!("kmeans:{id}")]);
        set.validate().unwrap();

        // Find the fat segment (the one holding 40 points) and split it.
        let fat = set.segments.iter().find(|s| s.size() == 40).expect("merged blob pair").id;
        let refined = refine(&set, &points, fat, &RefineMethod::KMeans { k: 2 }, 7, &options()).unwrap();
        refined.validate().unwrap();

        assert_eq!(refined.len(), 4, "3 - 1 + 2 segments");
        // Survivors first with compacted ids and original provenance.
        for s in &refined.segments[..2] {
            assert_eq!(s.provenance.len(), 1);
            assert!(s.provenance[0].starts_with("kmeans:"));
        }
        // New parts appended, provenance extended.
        for (i, s) in refined.segments[2..].iter().enumerate() {
            assert_eq!(s.size(), 20);
            assert_eq!(s.provenance.len(), 2);
            assert_eq!(s.provenance[1], format!("kmeans:{i}"));
            assert_eq!(s.id, 2 + i);
        }
    }

    #[test]
    fn refine_with_one_part_is_the_identity() {
        let (points, _) = gaussian_blobs(
            &[
                BlobSpec { center: vec![0.0], n: 20, sigma: 0.3 },
                BlobSpec { center: vec![8.0], n: 20, sigma: 0.3 },
            ],
            1,
        )
        .unwrap();
        let base = kmeans::fit(&points, 2, 3, &options()).unwrap();
        let set = SegmentSet::from_labels(&points, &base.assignments, |id| vec![format!("kmeans:{id}")]);
        let same = refine(&set, &points, 0, &RefineMethod::KMeans { k: 1 }, 99, &options()).unwrap();
        assert_eq!(same, set);
    }

    #[test]
    fn refine_rejects_unknown_targets() {
        let (points, _) = gaussian_blobs(&[BlobSpec { center: vec![0.0], n: 10, sigma: 0.1 }], 2).unwrap();
        let base = kmeans::fit(&points, 1, 0, &options()).unwrap();
        let set = SegmentSet::from_labels(&points, &base.assignments, |id| vec![format!("kmeans:{id}")]);
        assert!(matches!(
            refine(&set, &points, 5, &RefineMethod::KMeans { k: 2 }, 0, &options()),
            Err(Error::SegmentNotFound { id: 5, count: 1 })
        ));
        assert!(matches!(
            resolve_refine_target(RefineTarget::Id(9), &set, &points),
            Err(Error::SegmentNotFound { .. })
        ));
    }

    #[test]
    fn max_recency_spread_picks_the_widest_segment() {
        // Segment 0 tight on axis 0, segment 1 wide on axis 0.
        let values = vec![
            0.0, 0.0, //
            0.1, 0.0, //
            5.0, 0.0, //
            9.0, 0.0,
        ];
        let ids = (0..4).map(|i| format!("p{i}")).collect();
        let points = PointSet::new(ids, values, 2).unwrap();
        let set = SegmentSet::from_labels(&points, &[0, 0, 1, 1], |id| vec![format!("kmeans:{id}")]);
        let picked = resolve_refine_target(RefineTarget::MaxRecencySpread, &set, &points).unwrap();
        assert_eq!(picked, 1);
    }

    #[test]
    fn model1_yields_k1_plus_k2_minus_1_segments() {
        // Three tight blobs plus one wide blob (bimodal along axis 0).
        let (points, truth) = gaussian_blobs(
            &[
                BlobSpec { center: vec![8.0, 0.0, 0.0], n: 60, sigma: 0.3 },
                BlobSpec { center: vec![0.0, 8.0, 0.0], n: 60, sigma: 0.3 },
                BlobSpec { center: vec![0.0, 0.0, 8.0], n: 60, sigma: 0.3 },
                BlobSpec { center: vec![-6.0, -6.0, -6.0], n: 30, sigma: 0.3 },
                BlobSpec { center: vec![-2.0, -6.0, -6.0], n: 30, sigma: 0.3 },
            ],
            17,
        )
        .unwrap();
        // Blobs 3 and 4 act as one base cluster with the widest axis-0
        // spread; truth distinguishes the five lumps.
        let set = run_model1(&points, 4, 2, RefineTarget::MaxRecencySpread, 1234, &options()).unwrap();
        set.validate().unwrap();
        assert_eq!(set.len(), 5);

        let ari = adjusted_rand_index(&set.assignment().unwrap(), &truth);
        assert!(ari > 0.95, "model 1 should recover the planted lumps, ari = {ari}");

        // k2 = 1 keeps the base segmentation.
        let base = run_model1(&points, 4, 1, RefineTarget::MaxRecencySpread, 1234, &options()).unwrap();
        assert_eq!(base.len(), 4);
    }

    #[test]
    fn model2_builds_outlier_segments_from_noise() {
        // Two dense blobs plus scattered far-out points.
        let mut specs = vec![
            BlobSpec { center: vec![0.0, 0.0], n: 200, sigma: 0.25 },
            BlobSpec { center: vec![6.0, 0.0], n: 200, sigma: 0.25 },
        ];
        // Two sparse outlier groups, one near each "corner".
        specs.push(BlobSpec { center: vec![3.0, 8.0], n: 12, sigma: 0.9 });
        specs.push(BlobSpec { center: vec![3.0, -8.0], n: 12, sigma: 0.9 });
        let (points, _) = gaussian_blobs(&specs, 23).unwrap();

        let params = DbscanParams { eps: 0.9, min_points: 5 };
        let set = run_model2(&points, &params, 2, 77, &options()).unwrap();
        set.validate().unwrap();

        let extreme: Vec<&Segment> = set.segments.iter().filter(|s| s.is_extreme()).collect();
        assert_eq!(extreme.len(), 2, "two outlier segments requested");
        for s in &extreme {
            assert_eq!(s.provenance[0], "dbscan:noise");
            assert!(s.provenance[1].starts_with("kmeans:"));
        }
        // Dense segments precede outlier segments.
        let first_extreme = set.segments.iter().position(|s| s.is_extreme()).unwrap();
        assert!(set.segments[..first_extreme].iter().all(|s| !s.is_extreme()));
        assert!(set.segments[first_extreme..].iter().all(|s| s.is_extreme()));
    }

    #[test]
    fn model2_fails_plainly_when_there_is_no_noise() {
        let (points, _) = gaussian_blobs(
            &[BlobSpec { center: vec![0.0, 0.0], n: 100, sigma: 0.2 }],
            3,
        )
        .unwrap();
        // Everything is dense: huge eps swallows all points.
        let err = run_model2(
            &points,
            &DbscanParams { eps: 5.0, min_points: 3 },
            2,
            0,
            &options(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)), "got {err:?}");
    }

    #[test]
    fn model3_returns_matching_segments_and_tree() {
        let (points, truth) = gaussian_blobs(
            &[
                BlobSpec { center: vec![0.0, 0.0], n: 40, sigma: 0.3 },
                BlobSpec { center: vec![7.0, 0.0], n: 40, sigma: 0.3 },
                BlobSpec { center: vec![0.0, 7.0], n: 40, sigma: 0.3 },
            ],
            31,
        )
        .unwrap();
        let (set, tree) = run_model3(&points, 3, Linkage::Ward, 20_000).unwrap();
        set.validate().unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(tree.merges.len(), points.len() - 1);
        assert_eq!(tree.leaves, points.ids());

        let ari = adjusted_rand_index(&set.assignment().unwrap(), &truth);
        assert!(ari > 0.99, "ward on separated blobs, ari = {ari}");
        for s in &set.segments {
            assert_eq!(s.provenance, vec![format!("agglomerative:{}", s.id)]);
        }
    }

    #[test]
    fn labels_encode_population_relative_traits() {
        // 10 customers; medians: recency 5.5 -> nearest-rank 5, frequency
        // median 5, spend p90 = 9000 cents.
        let vectors: Vec<RfmVector> = (1..=10)
            .map(|i| rfm_vector(&format!("c{i}"), i as i64, i as u64, 1000 * i as i64))
            .collect();
        let values: Vec<f64> = vectors
            .iter()
            .flat_map(|v| [v.recency_days as f64, v.frequency as f64, v.monetary.to_f64()])
            .collect();
        let ids = vectors.iter().map(|v| v.customer_id.clone()).collect();
        let points = PointSet::new(ids, values, 3).unwrap();

        // Segment 0: customers 1-5 (recent, infrequent-ish, low spend);
        // segment 1: customers 6-10 (stale, frequent, high spend).
        let labels_in = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let mut set = SegmentSet::from_labels(&points, &labels_in, |_| vec!["dbscan:noise".to_string()]);
        label_segments(&mut set, &vectors).unwrap();

        let s0 = set.segments[0].label.as_ref().unwrap();
        // Centroid of 1..5: recency 3 <= median 5 -> active; frequency 3 <
        // 5 -> not frequent; spend 30.00 < 90.00 -> not high.
        assert!(s0.active && !s0.frequency_high && !s0.spend_high && s0.extreme);
        assert!(s0.text.contains("active") && !s0.text.contains("inactive"));
        assert!(s0.text.contains("outlier"));

        let s1 = set.segments[1].label.as_ref().unwrap();
        // Centroid of 6..10: recency 8 > 5 -> inactive; frequency 8 >= 5;
        // spend 80.00 < p90 90.00 -> not high spend.
        assert!(!s1.active && s1.frequency_high && !s1.spend_high);
        assert!(s1.text.contains("inactive"));

        // Raw centroids got recorded.
        assert_eq!(set.segments[0].centroid_raw.as_ref().unwrap()[0], 3.0);
        assert_eq!(set.segments[1].centroid_raw.as_ref().unwrap()[1], 8.0);

        // A segment centroid at exactly the 90th percentile counts as high
        // spend (boundary is inclusive).
        let one_segment = vec![0; 10];
        let mut all = SegmentSet::from_labels(&points, &one_segment, |_| vec!["kmeans:0".to_string()]);
        label_segments(&mut all, &vectors).unwrap();
        let label = all.segments[0].label.as_ref().unwrap();
        assert!(!label.extreme);
        assert!(!label.text.contains("outlier"));
    }

    #[test]
    fn label_text_is_a_pure_function_of_flags() {
        let a = label_text(true, false, true, false);
        let b = label_text(true, false, true, false);
        assert_eq!(a, b);
        assert_ne!(label_text(true, true, true, true), label_text(true, true, true, false));
        // All 16 combinations render distinct, self-consistent text.
        let mut seen = std::collections::HashSet::new();
        for bits in 0..16u8 {
            let text = label_text(bits & 1 != 0, bits & 2 != 0, bits & 4 != 0, bits & 8 != 0);
            assert!(seen.insert(text.clone()), "duplicate text {text}");
            assert_eq!(bits & 1 != 0, !text.contains("inactive"));
            assert_eq!(bits & 8 != 0, text.contains("outlier"));
        }
    }

    #[test]
    fn segment_csv_lists_every_customer_in_order() {
        let vectors: Vec<RfmVector> = (0..4)
            .map(|i| rfm_vector(&format!("c{i}"), i as i64 + 1, 1, 100))
            .collect();
        let values: Vec<f64> = vectors
            .iter()
            .flat_map(|v| [v.recency_days as f64, v.frequency as f64, v.monetary.to_f64()])
            .collect();
        let ids: Vec<String> = vectors.iter().map(|v| v.customer_id.clone()).collect();
        let points = PointSet::new(ids.clone(), values, 3).unwrap();
        let mut set = SegmentSet::from_labels(&points, &[0, 1, 0, 1], |id| vec![format!("kmeans:{id}")]);
        label_segments(&mut set, &vectors).unwrap();

        let mut out = Vec::new();
        write_segments_csv(&mut out, &set, &ids).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "customer_id,segment_id,label_text");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("c0,0,"));
        assert!(lines[2].starts_with("c1,1,"));

        let mut out = Vec::new();
        write_scatter_csv(&mut out, &set, &vectors).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "recency,frequency,monetary,segment_id");
        assert_eq!(lines[1], "1,1,1.00,0");
        assert_eq!(lines[2], "2,1,1.00,1");
    }

    #[test]
    fn assignment_rejects_broken_partitions() {
        let points = PointSet::new(
            vec!["a".to_string(), "b".to_string()],
            vec![0.0, 1.0],
            1,
        )
        .unwrap();
        let set = SegmentSet::from_labels(&points, &[0, 0], |_| vec!["kmeans:0".to_string()]);

        let mut overlapping = set.clone();
        overlapping.segments[0].member_indices = vec![0, 0];
        assert!(overlapping.assignment().is_err());

        let mut orphaned = set.clone();
        orphaned.segments[0].member_indices = vec![0];
        assert!(orphaned.assignment().is_err());

        set.validate().unwrap();
    }
}
