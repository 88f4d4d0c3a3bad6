//! Density-based clustering (DBSCAN) with a kd-tree neighbour index.
//!
//! A point is a *core* point when at least `min_points` points — itself
//! included — lie within distance `eps` (inclusive). Clusters grow outward
//! from core points; non-core points inside a core point's ball join as
//! *border* points; everything else is *noise*, labelled `-1`.
//!
//! The algorithm is deterministic and order-independent in everything
//! except one documented corner: a border point in reach of several
//! clusters belongs to the one whose expansion touched it first, i.e. the
//! cluster grown from the lowest-index unvisited core point. Cluster ids
//! count up from 0 in that same discovery order.

use std::io::Write;

use super::kdtree::KdTree;
use super::PointSet;
use crate::{Error, Result};

/// Label used for noise points.
pub const NOISE: i32 = -1;

/// DBSCAN parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DbscanParams {
    /// Neighbourhood radius; a neighbour at exactly `eps` counts.
    pub eps: f64,
    /// Minimum ball population (self included) for a core point.
    pub min_points: usize,
}

/// Role a point played in the clustering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointKind {
    /// Has `min_points` or more neighbours; interior of a cluster.
    Core,
    /// In reach of a core point but not core itself; edge of a cluster.
    Border,
    /// In reach of no core point; labelled [`NOISE`].
    Noise,
}

/// A DBSCAN clustering: one label and kind per point.
#[derive(Debug, Clone, PartialEq)]
pub struct DbscanResult {
    /// Cluster id per point, `0..n_clusters`, or [`NOISE`].
    pub labels: Vec<i32>,
    /// Structural role per point; `labels[i] == NOISE` exactly when
    /// `kinds[i] == PointKind::Noise`.
    pub kinds: Vec<PointKind>,
    /// Number of clusters found.
    pub n_clusters: usize,
}

impl DbscanResult {
    /// Number of noise points.
    pub fn noise_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == NOISE).count()
    }

    /// Noise share of the whole point set.
    pub fn noise_fraction(&self) -> f64 {
        self.noise_count() as f64 / self.labels.len() as f64
    }

    /// Member counts per cluster id.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.n_clusters];
        for &l in &self.labels {
            if l >= 0 {
                sizes[l as usize] += 1;
            }
        }
        sizes
    }

    /// Indices of noise points, ascending.
    pub fn noise_indices(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == NOISE).collect()
    }
}

/// Runs DBSCAN over the point set.
///
/// Neighbour lookups go through a kd-tree, so the overall cost on
/// well-behaved data is O(n log n) rather than the O(n^2) of pairwise
/// scanning. Labels, kinds and cluster count are fully determined by the
/// data and parameters (see the module notes on border ties).
pub fn fit(points: &PointSet, params: &DbscanParams) -> Result<DbscanResult> {
    if !(params.eps > 0.0 && params.eps.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "eps must be finite and positive, got {}",
            params.eps
        )));
    }
    if params.min_points == 0 {
        return Err(Error::InvalidParam("min_points must be at least 1".to_string()));
    }

    let n = points.len();
    let tree = KdTree::build(points);
    let neighbourhoods: Vec<Vec<u32>> = (0..n)
        .map(|i| tree.within(points.point(i), params.eps))
        .collect();
    let core: Vec<bool> = neighbourhoods
        .iter()
        .map(|nb| nb.len() >= params.min_points)
        .collect();

    const UNVISITED: i32 = -2;
    let mut labels = vec![UNVISITED; n];
    let mut cluster: i32 = 0;
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        if !core[start] || labels[start] != UNVISITED {
            continue;
        }
        labels[start] = cluster;
        queue.push_back(start as u32);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbourhoods[p as usize] {
                if labels[q as usize] != UNVISITED {
                    continue;
                }
                labels[q as usize] = cluster;
                if core[q as usize] {
                    queue.push_back(q);
                }
            }
        }
        cluster += 1;
    }

    let mut kinds = Vec::with_capacity(n);
    for i in 0..n {
        if labels[i] == UNVISITED {
            labels[i] = NOISE;
        }
        kinds.push(if core[i] {
            PointKind::Core
        } else if labels[i] == NOISE {
            PointKind::Noise
        } else {
            PointKind::Border
        });
    }

    Ok(DbscanResult {
        labels,
        kinds,
        n_clusters: cluster as usize,
    })
}

/// One grid cell of a parameter sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    /// Radius used.
    pub eps: f64,
    /// Core threshold used.
    pub min_points: usize,
    /// Clusters found.
    pub clusters: usize,
    /// Share of points labelled noise.
    pub noise_fraction: f64,
    /// Size of the biggest cluster (0 when everything is noise).
    pub largest_cluster_size: usize,
}

/// Runs DBSCAN over the cross product of the two grids, row-major in the
/// order given (outer loop `eps`, inner `min_points`).
pub fn param_sweep(
    points: &PointSet,
    eps_grid: &[f64],
    min_points_grid: &[usize],
) -> Result<Vec<SweepRow>> {
    if eps_grid.is_empty() || min_points_grid.is_empty() {
        return Err(Error::InvalidParam(
            "parameter sweep needs at least one eps and one min_points value".to_string(),
        ));
    }
    let mut rows = Vec::with_capacity(eps_grid.len() * min_points_grid.len());
    for &eps in eps_grid {
        for &min_points in min_points_grid {
            let result = fit(points, &DbscanParams { eps, min_points })?;
            rows.push(SweepRow {
                eps,
                min_points,
                clusters: result.n_clusters,
                noise_fraction: result.noise_fraction(),
                largest_cluster_size: result.cluster_sizes().into_iter().max().unwrap_or(0),
            });
        }
    }
    Ok(rows)
}

/// Writes sweep rows as CSV:
/// `eps,min_points,clusters,noise_fraction,largest_cluster_size`.
pub fn write_sweep_csv<W: Write>(writer: W, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["eps", "min_points", "clusters", "noise_fraction", "largest_cluster_size"])?;
    for r in rows {
        w.write_record([
            r.eps.to_string().as_str(),
            &r.min_points.to_string(),
            &r.clusters.to_string(),
            &r.noise_fraction.to_string(),
            &r.largest_cluster_size.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
