//! Clustering algorithms over dense points.
//!
//! Three families, all implemented here rather than pulled in, since their
//! exact behaviour (initialization, tie-breaking, merge ordering) is part
//! of this crate's contract:
//!
//! * [`kmeans`] — Lloyd's algorithm with k-means++ seeding, restarts and an
//!   elbow scan for choosing k.
//! * [`dbscan`] — density clustering with a kd-tree index and a parameter
//!   sweep helper.
//! * [`agglomerative`] — bottom-up hierarchical merging with four linkage
//!   rules and dendrogram export.
//!
//! Every algorithm consumes a [`PointSet`]: ids + dense row-major `f64`
//! coordinates, validated finite up front so the numeric kernels never see
//! a NaN.

pub mod agglomerative;
pub mod dbscan;
pub mod kdtree;
pub mod kmeans;

use crate::ingest::FeatureMatrix;
use crate::{Error, Result};

/// A set of labelled points in fixed-dimension Euclidean space.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    ids: Vec<String>,
    values: Vec<f64>,
    dims: usize,
}

impl PointSet {
    /// Builds a point set from row-major coordinates.
    ///
    /// Requires at least one point, a positive dimension, a buffer of
    /// exactly `ids.len() * dims` values, and fully finite coordinates.
    pub fn new(ids: Vec<String>, values: Vec<f64>, dims: usize) -> Result<PointSet> {
        if dims == 0 {
            return Err(Error::InvalidParam("points need at least one dimension".to_string()));
        }
        if ids.is_empty() {
            return Err(Error::EmptyInput("point set holds no points".to_string()));
        }
        if values.len() != ids.len() * dims {
            return Err(Error::InvalidParam(format!(
                "{} points x {} dims needs {} coordinates, got {}",
                ids.len(),
                dims,
                ids.len() * dims,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("point coordinate is {bad}")));
        }
        Ok(PointSet { ids, values, dims })
    }

    /// Converts a (finite) feature matrix, keeping row ids.
    pub fn from_matrix(matrix: &FeatureMatrix) -> Result<PointSet> {
        PointSet::new(
            matrix.row_ids().to_vec(),
            matrix.values().to_vec(),
            matrix.n_cols(),
        )
    }

    /// Number of points.
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    /// True when empty — never, by construction, but keeps clippy and
    /// callers honest.
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Dimensionality of every point.
    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Point ids in storage order.
    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Coordinates of point `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dims..(i + 1) * self.dims]
    }

    /// The raw row-major coordinate buffer.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// A new set holding the chosen points (in the order given), keeping
    /// ids. Panics if an index is out of bounds; callers pass indices they
    /// derived from this same set.
    pub fn subset(&self, indices: &[usize]) -> PointSet {
        let mut ids = Vec::with_capacity(indices.len());
        let mut values = Vec::with_capacity(indices.len() * self.dims);
        for &i in indices {
            ids.push(self.ids[i].clone());
            values.extend_from_slice(self.point(i));
        }
        PointSet {
            ids,
            values,
            dims: self.dims,
        }
    }
}

/// Squared Euclidean distance between two points of equal dimension.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Euclidean distance between two points of equal dimension.
#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Compensated (Neumaier) summation: adds a running correction term so the
/// result is far less sensitive to addend order and magnitude spread than a
/// plain left fold. Used wherever sums feed comparisons, e.g. cluster
/// scatter across iterations.
pub fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut compensation = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            compensation += (sum - t) + v;
        } else {
            compensation += (v - t) + sum;
        }
        sum = t;
    }
    sum + compensation
}
