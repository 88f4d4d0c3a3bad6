//! Static kd-tree for fixed-radius neighbour queries.
//!
//! Built once over a point set, then queried many times — exactly the
//! access pattern of density clustering, where every point asks "who is
//! within eps of me?". The tree stores only a permutation of point indices
//! arranged so every subtree occupies a contiguous slice with its median at
//! the middle, so construction is O(n log n) without extra node
//! allocations.
//!
//! Queries are *inclusive*: a point at distance exactly `radius` counts.

use super::PointSet;

/// Immutable spatial index over a [`PointSet`].
pub struct KdTree<'a> {
    points: &'a PointSet,
    /// Permutation of point indices in kd layout; the subtree covering
    /// `order[lo..hi]` is rooted at `order[(lo + hi) / 2]`.
    order: Vec<u32>,
}

impl<'a> KdTree<'a> {
    /// Builds the index. Splitting axes cycle through the dimensions;
    /// medians are chosen by in-place selection, with ties broken by point
    /// index so construction is deterministic.
    pub fn build(points: &'a PointSet) -> KdTree<'a> {
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        let mut stack = vec![(0usize, points.len(), 0usize)];
        while let Some((lo, hi, axis)) = stack.pop() {
            if hi - lo <= 1 {
                continue;
            }
            let mid = (lo + hi) / 2;
            order[lo..hi].select_nth_unstable_by(mid - lo, |&a, &b| {
                let ca = points.point(a as usize)[axis];
                let cb = points.point(b as usize)[axis];
                ca.partial_cmp(&cb).expect("finite coordinates").then(a.cmp(&b))
            });
            let next_axis = (axis + 1) % points.dims();
            stack.push((lo, mid, next_axis));
            stack.push((mid + 1, hi, next_axis));
        }
        KdTree { points, order }
    }

    /// Indices of all points with Euclidean distance `<= radius` from
    /// `center`, sorted ascending. Distances are compared in squared form,
    /// so no square roots are taken.
    pub fn within(&self, center: &[f64], radius: f64) -> Vec<u32> {
        debug_assert_eq!(center.len(), self.points.dims());
        debug_assert!(radius >= 0.0);
        let radius_sq = radius * radius;
        let mut hits = Vec::new();
        let mut stack = vec![(0usize, self.order.len(), 0usize)];
        while let Some((lo, hi, axis)) = stack.pop() {
            if lo >= hi {
                continue;
            }
            let mid = (lo + hi) / 2;
            let idx = self.order[mid];
            let coords = self.points.point(idx as usize);
            if super::sq_dist(center, coords) <= radius_sq {
                hits.push(idx);
            }
            let next_axis = (axis + 1) % self.points.dims();
            // Descend only into halves whose coordinate range can still
            // reach the ball; boundaries are inclusive to match `<=`.
            if center[axis] - radius <= coords[axis] {
                stack.push((lo, mid, next_axis));
            }
            if center[axis] + radius >= coords[axis] {
                stack.push((mid + 1, hi, next_axis));
            }
        }
        hits.sort_unstable();
        hits
    }
}
