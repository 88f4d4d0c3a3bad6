//! Agreement metrics between two partitions of the same items.

use std::collections::BTreeMap;

/// Adjusted Rand index between two labelings of the same points.
///
/// Label *values* are irrelevant — only the induced partitions matter — so
/// the two sides may use different label types entirely (cluster indices
/// vs. ground-truth names, noise markers, ...). Returns 1.0 for identical
/// partitions, ~0.0 for independent ones; negative values mean worse than
/// chance. When the adjustment denominator is zero (e.g. both sides put
/// everything in one cluster) the partitions are trivially identical and
/// the index is defined as 1.0.
///
/// # Panics
///
/// Panics when the slices differ in length — that is a caller bug, not a
/// data condition.
pub fn adjusted_rand_index<A: Ord, B: Ord>(a: &[A], b: &[B]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same points");
    let n = a.len();
    if n == 0 {
        return 1.0;
    }

    // Contingency table plus marginals, keyed by the labels themselves.
    let mut cells: BTreeMap<(&A, &B), u64> = BTreeMap::new();
    let mut rows: BTreeMap<&A, u64> = BTreeMap::new();
    let mut cols: BTreeMap<&B, u64> = BTreeMap::new();
    for (la, lb) in a.iter().zip(b) {
        *cells.entry((la, lb)).or_insert(0) += 1;
        *rows.entry(la).or_insert(0) += 1;
        *cols.entry(lb).or_insert(0) += 1;
    }

    // Pair counts; exact in f64 for any n below ~2^26 items (a pair count
    // is < 2^53), far beyond this crate's scale.
    fn comb2(x: u64) -> f64 {
        (x * (x - 1) / 2) as f64
    }
    let sum_cells: f64 = cells.values().map(|&c| comb2(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| comb2(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| comb2(c)).sum();
    let total = comb2(n as u64);

    if total == 0.0 {
        return 1.0; // a single point: any two labelings agree
    }
    let expected = sum_rows * sum_cols / total;
    let max_index = 0.5 * (sum_rows + sum_cols);
    let denominator = max_index - expected;
    if denominator == 0.0 {
        return 1.0;
    }
    (sum_cells - expected) / denominator
}
