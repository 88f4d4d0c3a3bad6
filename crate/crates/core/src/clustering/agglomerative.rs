//! Bottom-up (agglomerative) hierarchical clustering.
//!
//! Starts from singletons and repeatedly merges the globally closest pair
//! of clusters under the chosen [`Linkage`], producing a full merge
//! history — a dendrogram — that can be cut at any cluster count without
//! refitting.
//!
//! Inter-cluster distances are maintained with the Lance–Williams update,
//! so a merge costs O(active clusters) plus occasional nearest-neighbour
//! cache repairs; typical fits are O(n^2) time on an O(n^2) distance
//! matrix, with the classic O(n^3) worst case. Input size is therefore
//! gated by a cap ([`DEFAULT_SIZE_CAP`]) that callers must raise
//! explicitly for larger runs.
//!
//! Determinism: ties on distance break by the merged nodes' ids
//! (lexicographically smaller pair first), so the merge sequence is a pure
//! function of the input.

use serde::{Deserialize, Serialize};

use super::{dist, sq_dist, PointSet};
use crate::{Error, Result};

/// Inter-cluster distance rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    /// Closest cross-pair of points.
    Single,
    /// Farthest cross-pair of points.
    Complete,
    /// Mean over all cross-pairs of points.
    Average,
    /// Minimum within-cluster variance increase (merge height equals the
    /// Euclidean distance when two singletons merge).
    Ward,
}

impl Linkage {
    /// Every supported linkage, in documentation order.
    pub const ALL: [Linkage; 4] = [Linkage::Single, Linkage::Complete, Linkage::Average, Linkage::Ward];
}

impl std::str::FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Linkage> {
        match s {
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            "ward" => Ok(Linkage::Ward),
            other => Err(Error::InvalidParam(format!(
                "unknown linkage {other:?}; expected single, complete, average or ward"
            ))),
        }
    }
}

impl std::fmt::Display for Linkage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
            Linkage::Ward => "ward",
        })
    }
}

/// Default maximum input size for [`fit`]. The distance matrix alone is
/// ~1.6 GB at this size; anything bigger needs a deliberate override.
pub const DEFAULT_SIZE_CAP: usize = 20_000;

/// One merge step. Node ids: leaf `i` is node `i`; the cluster created by
/// merge `m` (0-based) is node `n + m`, where `n` is the leaf count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    /// Smaller child node id.
    pub left: usize,
    /// Larger child node id.
    pub right: usize,
    /// Inter-cluster distance at which the children merged; non-decreasing
    /// across the sequence for all supported linkages.
    pub height: f64,
    /// Number of leaves under the new node.
    pub size: usize,
}

/// A full merge history over named leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeTree {
    /// Leaf ids in input order; leaf `i` is node `i`.
    pub leaves: Vec<String>,
    /// Merges in the order they happened (`n - 1` of them for a full fit).
    pub merges: Vec<Merge>,
}

/// Clusters `points` into `n_clusters` groups, returning per-point labels
/// and the full merge tree.
///
/// Labels are `0..n_clusters`, numbered by each cluster's smallest point
/// index. Refuses inputs larger than `size_cap` (see [`DEFAULT_SIZE_CAP`])
/// before allocating anything quadratic.
pub fn fit(
    points: &PointSet,
    n_clusters: usize,
    linkage: Linkage,
    size_cap: usize,
) -> Result<(Vec<usize>, MergeTree)> {
    let n = points.len();
    if n > size_cap {
        return Err(Error::SizeCapExceeded(format!(
            "agglomerative clustering over {n} points exceeds the cap of {size_cap}: \
             cost grows as O(n^2) memory and up to O(n^3) time; raise the cap explicitly \
             to run anyway"
        )));
    }
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::InvalidParam(format!(
            "n_clusters must lie in 1..={n}, got {n_clusters}"
        )));
    }

    let tree = build_tree(points, linkage);
    let labels = cut(&tree, n_clusters)?;
    Ok((labels, tree))
}

/// Whether the matrix holds plain or squared distances for this linkage.
/// Ward's update rule works in squared space; the recorded height takes
/// the square root at merge time.
fn squared_domain(linkage: Linkage) -> bool {
    matches!(linkage, Linkage::Ward)
}

fn build_tree(points: &PointSet, linkage: Linkage) -> MergeTree {
    let n = points.len();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    if n == 1 {
        return MergeTree {
            leaves: points.ids().to_vec(),
            merges,
        };
    }

    // Condensed upper-triangle distance matrix between active slots:
    // row i holds (i, i+1), ..., (i, n-1).
    let mut matrix = vec![0.0f64; n * (n - 1) / 2];
    let index = |i: usize, j: usize| -> usize {
        debug_assert!(i < j);
        i * (n - 1) - (i * i - i) / 2 + j - i - 1
    };
    for i in 0..n {
        for j in (i + 1)..n {
            matrix[index(i, j)] = if squared_domain(linkage) {
                sq_dist(points.point(i), points.point(j))
            } else {
                dist(points.point(i), points.point(j))
            };
        }
    }

    let mut active: Vec<bool> = vec![true; n];
    let mut size: Vec<usize> = vec![1; n];
    let mut node: Vec<usize> = (0..n).collect();

    // Per-slot nearest neighbour cache. Keys order by distance first, then
    // by the (smaller, larger) node-id pair, which is how merge candidates
    // are ranked everywhere below.
    let key_of = |d: f64, node_a: usize, node_b: usize| -> (f64, usize, usize) {
        (d, node_a.min(node_b), node_a.max(node_b))
    };
    let mut nn: Vec<usize> = vec![usize::MAX; n];
    let mut nn_key: Vec<(f64, usize, usize)> = vec![(f64::INFINITY, usize::MAX, usize::MAX); n];

    let recompute = |slot: usize,
                     matrix: &[f64],
                     active: &[bool],
                     node: &[usize],
                     nn: &mut [usize],
                     nn_key: &mut [(f64, usize, usize)]| {
        let mut best_slot = usize::MAX;
        let mut best_key = (f64::INFINITY, usize::MAX, usize::MAX);
        for other in 0..n {
            if other == slot || !active[other] {
                continue;
            }
            let (lo, hi) = (slot.min(other), slot.max(other));
            let key = key_of(matrix[index(lo, hi)], node[slot], node[other]);
            if key < best_key {
                best_key = key;
                best_slot = other;
            }
        }
        nn[slot] = best_slot;
        nn_key[slot] = best_key;
    };

    for slot in 0..n {
        recompute(slot, &matrix, &active, &node, &mut nn, &mut nn_key);
    }

    for m in 0..(n - 1) {
        // Globally closest pair = best cached key among active slots.
        let mut x = usize::MAX;
        let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
        for slot in 0..n {
            if active[slot] && nn_key[slot] < best {
                best = nn_key[slot];
                x = slot;
            }
        }
        let y = nn[x];
        let (keep, gone) = (x.min(y), x.max(y));
        let merge_d = matrix[index(keep, gone)];
        let height = if squared_domain(linkage) { merge_d.sqrt() } else { merge_d };
        merges.push(Merge {
            left: node[keep].min(node[gone]),
            right: node[keep].max(node[gone]),
            height,
            size: size[keep] + size[gone],
        });

        // Lance–Williams: fold the dropped slot's distances into the kept
        // slot for every other active cluster.
        for z in 0..n {
            if z == keep || z == gone || !active[z] {
                continue;
            }
            let d_az = matrix[index(keep.min(z), keep.max(z))];
            let d_bz = matrix[index(gone.min(z), gone.max(z))];
            let updated = match linkage {
                Linkage::Single => d_az.min(d_bz),
                Linkage::Complete => d_az.max(d_bz),
                Linkage::Average => {
                    let (a, b) = (size[keep] as f64, size[gone] as f64);
                    (a * d_az + b * d_bz) / (a + b)
                }
                Linkage::Ward => {
                    let (a, b, c) = (size[keep] as f64, size[gone] as f64, size[z] as f64);
                    // Squared-domain update; clamp tiny negative rounding.
                    (((a + c) * d_az + (b + c) * d_bz - c * merge_d) / (a + b + c)).max(0.0)
                }
            };
            matrix[index(keep.min(z), keep.max(z))] = updated;
        }

        active[gone] = false;
        size[keep] += size[gone];
        node[keep] = n + m;

        if m + 1 == n - 1 {
            break; // nothing left to pair with
        }

        // Repair the nearest-neighbour cache. A slot whose cached
        // neighbour was involved in the merge gets a full rescan; every
        // other slot only needs comparing against its new distance to the
        // merged cluster (all its other distances are untouched).
        for z in 0..n {
            if z == keep || !active[z] {
                continue;
            }
            if nn[z] == keep || nn[z] == gone {
                recompute(z, &matrix, &active, &node, &mut nn, &mut nn_key);
            } else {
                let candidate = key_of(matrix[index(keep.min(z), keep.max(z))], node[keep], node[z]);
                if candidate < nn_key[z] {
                    nn[z] = keep;
                    nn_key[z] = candidate;
                }
            }
        }
        recompute(keep, &matrix, &active, &node, &mut nn, &mut nn_key);
    }

    MergeTree {
        leaves: points.ids().to_vec(),
        merges,
    }
}

/// Cuts a merge tree into `n_clusters` groups by replaying all but the
/// last `n_clusters - 1` merges. Labels are `0..n_clusters`, ordered by
/// each cluster's smallest leaf index.
pub fn cut(tree: &MergeTree, n_clusters: usize) -> Result<Vec<usize>> {
    let n = tree.leaves.len();
    if n_clusters == 0 || n_clusters > n {
        return Err(Error::InvalidParam(format!(
            "cannot cut {n} leaves into {n_clusters} clusters"
        )));
    }
    let to_apply = n - n_clusters;
    if to_apply > tree.merges.len() {
        return Err(Error::InvalidParam(format!(
            "tree holds {} merges, not enough to reach {n_clusters} clusters from {n} leaves",
            tree.merges.len()
        )));
    }

    let mut parent: Vec<usize> = (0..n + to_apply).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for (m, merge) in tree.merges[..to_apply].iter().enumerate() {
        let new_node = n + m;
        for child in [merge.left, merge.right] {
            if child >= new_node {
                return Err(Error::Malformed(format!(
                    "merge {m} references node {child}, which does not exist yet"
                )));
            }
            let root = find(&mut parent, child);
            parent[root] = new_node;
        }
    }

    let mut labels = vec![usize::MAX; n];
    let mut next = 0usize;
    let mut label_of_root = std::collections::HashMap::new();
    for leaf in 0..n {
        let root = find(&mut parent, leaf);
        let label = *label_of_root.entry(root).or_insert_with(|| {
            let l = next;
            next += 1;
            l
        });
        labels[leaf] = label;
    }
    if next != n_clusters {
        return Err(Error::Malformed(format!(
            "cutting produced {next} clusters instead of {n_clusters}; the merge \
             tree references nodes inconsistently"
        )));
    }
    Ok(labels)
}

/// Serializes a merge tree as pretty-printed JSON
/// (`{"leaves": [...], "merges": [{"left", "right", "height", "size"}, ...]}`).
pub fn dendrogram_to_json(tree: &MergeTree) -> String {
    serde_json::to_string_pretty(tree).expect("merge tree serializes")
}

/// Parses and validates a dendrogram produced by [`dendrogram_to_json`].
///
/// Beyond JSON syntax, this checks structural soundness: child node ids in
/// range and used at most once, and sizes consistent with the children.
pub fn dendrogram_from_json(text: &str) -> Result<MergeTree> {
    let tree: MergeTree = serde_json::from_str(text)?;
    let n = tree.leaves.len();
    if n == 0 {
        return Err(Error::Malformed("dendrogram has no leaves".to_string()));
    }
    if tree.merges.len() > n - 1 {
        return Err(Error::Malformed(format!(
            "dendrogram has {} merges for {n} leaves; at most {} are possible",
            tree.merges.len(),
            n - 1
        )));
    }
    let mut node_size: Vec<usize> = (0..n).map(|_| 1).collect();
    let mut used = vec![false; n + tree.merges.len()];
    for (m, merge) in tree.merges.iter().enumerate() {
        let new_node = n + m;
        if merge.left >= merge.right {
            return Err(Error::Malformed(format!(
                "merge {m}: left node {} must be smaller than right node {}",
                merge.left, merge.right
            )));
        }
        for child in [merge.left, merge.right] {
            if child >= new_node {
                return Err(Error::Malformed(format!(
                    "merge {m} references node {child} before it exists"
                )));
            }
            if used[child] {
                return Err(Error::Malformed(format!(
                    "node {child} is a child of two different merges"
                )));
            }
            used[child] = true;
        }
        if !merge.height.is_finite() || merge.height < 0.0 {
            return Err(Error::Malformed(format!(
                "merge {m} has invalid height {}",
                merge.height
            )));
        }
        let combined = node_size[merge.left] + node_size[merge.right];
        if merge.size != combined {
            return Err(Error::Malformed(format!(
                "merge {m} declares size {} but its children hold {combined} leaves",
                merge.size
            )));
        }
        node_size.push(combined);
    }
    Ok(tree)
}
