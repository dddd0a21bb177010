//! Exact penalized segmentation by dynamic programming.
//!
//! Minimizes `Σ C(segment) + penalty · (#segments − 1)` subject to every
//! segment having at least `min_size` samples. The optimal-partitioning
//! recursion is `F(t) = min_s F(s) + C(s, t) + penalty` with `F(0) = −penalty`.

use super::cost::SegmentCost;

/// Candidates whose value exceeds the current optimum by more than this
/// (relative) margin are pruned; the margin absorbs floating-point error in
/// the subadditivity of the cost so pruning never discards an optimum.
const PRUNE_MARGIN: f64 = 1e-9;

pub(crate) fn solve(
    cost: &impl SegmentCost,
    penalty: f64,
    min_size: usize,
    prune: bool,
) -> Vec<usize> {
    let n = cost.n_samples();
    let mut f = vec![f64::INFINITY; n + 1];
    let mut last = vec![0usize; n + 1];
    f[0] = -penalty;

    let mut candidates: Vec<usize> = vec![0];
    // a candidate pruned while processing t stays eligible until t + min_size,
    // when t itself becomes an admissible last change point
    let mut kill_at = vec![usize::MAX; n + 1];

    for t in min_size..=n {
        if prune {
            candidates.retain(|&s| kill_at[s] > t);
        }
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for &s in &candidates {
            if t - s < min_size {
                break;
            }
            let v = f[s] + cost.cost(s, t) + penalty;
            if v < best {
                best = v;
                arg = s;
            }
        }
        f[t] = best;
        last[t] = arg;
        if !best.is_finite() {
            continue;
        }
        if prune {
            let bound = best;
            for &s in &candidates {
                if t - s < min_size {
                    break;
                }
                let c = cost.cost(s, t);
                let lhs = f[s] + c;
                if lhs > bound + PRUNE_MARGIN * (1.0 + bound.abs() + c) {
                    kill_at[s] = kill_at[s].min(t + min_size);
                }
            }
        }
        // t joins the candidate set; candidates stay sorted ascending
        if t + min_size <= n {
            candidates.push(t);
        }
    }

    let mut boundaries = Vec::new();
    let mut t = n;
    while t > 0 {
        let s = last[t];
        if s > 0 {
            boundaries.push(s);
        }
        t = s;
    }
    boundaries.reverse();
    boundaries
}
