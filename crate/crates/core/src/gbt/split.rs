//! Exact greedy split search on gradient/hessian statistics.

use ndarray::ArrayView2;
use rayon::prelude::*;

use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitParams<T> {
    pub lambda: T,
    pub gamma: T,
    pub min_child_weight: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate<T> {
    pub feature: usize,
    pub threshold: T,
    pub gain: T,
    pub left_grad: T,
    pub left_hess: T,
    pub right_grad: T,
    pub right_hess: T,
}

/// Reduction in the regularized second-order objective from splitting a node,
/// minus `gamma`.
#[inline]
pub fn split_gain<T: Scalar>(gl: T, hl: T, gr: T, hr: T, lambda: T, gamma: T) -> T {
    let score = |g: T, h: T| g * g / (h + lambda);
    T::lit(0.5) * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

/// Threshold strictly above `lo` and at most `hi`, so that `lo < t` is false
/// and `hi < t` is false only for values `>= hi`.
#[inline]
pub fn midpoint<T: Scalar>(lo: T, hi: T) -> T {
    let mid = lo + (hi - lo) / T::lit(2.0);
    if mid > lo {
        mid
    } else {
        hi
    }
}

/// Scans one feature's rows (sorted ascending by value) and returns the best
/// admissible split. Equal gains keep the lower threshold.
pub(crate) fn scan_feature<T: Scalar>(
    x: ArrayView2<'_, T>,
    feature: usize,
    sorted_rows: &[u32],
    grad: &[T],
    hess: &[T],
    total_grad: T,
    total_hess: T,
    params: &SplitParams<T>,
) -> Option<SplitCandidate<T>> {
    let mut best: Option<SplitCandidate<T>> = None;
    let mut gl = T::zero();
    let mut hl = T::zero();
    for w in sorted_rows.windows(2) {
        let (r, next) = (w[0] as usize, w[1] as usize);
        gl += grad[r];
        hl += hess[r];
        let (lo, hi) = (x[[r, feature]], x[[next, feature]]);
        if !(lo < hi) {
            continue;
        }
        let gr = total_grad - gl;
        let hr = total_hess - hl;
        if hl < params.min_child_weight || hr < params.min_child_weight {
            continue;
        }
        let gain = split_gain(gl, hl, gr, hr, params.lambda, params.gamma);
        if best.is_none_or(|b| gain > b.gain) {
            best = Some(SplitCandidate {
                feature,
                threshold: midpoint(lo, hi),
                gain,
                left_grad: gl,
                left_hess: hl,
                right_grad: gr,
                right_hess: hr,
            });
        }
    }
    best
}

/// Picks the best per-feature candidate; ties go to the lower feature index.
pub(crate) fn reduce_candidates<T: Scalar>(
    candidates: impl IntoIterator<Item = Option<SplitCandidate<T>>>,
) -> Option<SplitCandidate<T>> {
    let mut best: Option<SplitCandidate<T>> = None;
    for c in candidates.into_iter().flatten() {
        if best.is_none_or(|b| c.gain > b.gain) {
            best = Some(c);
        }
    }
    best
}

/// Row indices sorted by the feature's value; equal values keep row order.
pub(crate) fn sort_rows_by_feature<T: Scalar>(
    x: ArrayView2<'_, T>,
    feature: usize,
    rows: &[u32],
) -> Vec<u32> {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|&a, &b| {
        x[[a as usize, feature]]
            .partial_cmp(&x[[b as usize, feature]])
            .expect("finite features")
    });
    sorted
}

/// Best split over all features for the given rows, regardless of gain sign.
/// Returns `None` when no admissible threshold exists.
pub fn find_best_split<T: Scalar>(
    x: ArrayView2<'_, T>,
    grad: &[T],
    hess: &[T],
    rows: &[usize],
    params: &SplitParams<T>,
) -> Option<SplitCandidate<T>> {
    let rows: Vec<u32> = rows.iter().map(|&r| r as u32).collect();
    let total_grad: T = rows.iter().map(|&r| grad[r as usize]).sum();
    let total_hess: T = rows.iter().map(|&r| hess[r as usize]).sum();
    let per_feature: Vec<_> = (0..x.ncols())
        .into_par_iter()
        .map(|f| {
            let sorted = sort_rows_by_feature(x, f, &rows);
            scan_feature(x, f, &sorted, grad, hess, total_grad, total_hess, params)
        })
        .collect();
    reduce_candidates(per_feature)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn gain_closed_form() {
        // 0.5 * (1/2 + 9/4 - 4/5)
        let g: f64 = split_gain(1.0, 1.0, -3.0, 3.0, 1.0, 0.0);
        assert!((g - 0.5 * (0.5 + 2.25 - 0.8)).abs() < 1e-15);
        let g2: f64 = split_gain(1.0, 1.0, -3.0, 3.0, 1.0, 0.25);
        assert!((g - g2 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn midpoint_between_adjacent_floats() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let t = midpoint(lo, hi);
        assert!(lo < t && !(hi < t));
        assert_eq!(midpoint(1.0, 3.0), 2.0);
    }

    #[test]
    fn picks_separating_threshold() {
        let x = array![[0.0, 5.0], [1.0, 5.0], [2.0, 5.0], [3.0, 5.0]];
        let grad = [1.0, 1.0, -1.0, -1.0];
        let hess = [0.25; 4];
        let params = SplitParams {
            lambda: 0.0,
            gamma: 0.0,
            min_child_weight: 0.0,
        };
        let best = find_best_split(x.view(), &grad, &hess, &[0, 1, 2, 3], &params).unwrap();
        assert_eq!(best.feature, 0);
        assert_eq!(best.threshold, 1.5);
        assert_eq!(best.left_grad, 2.0);
    }

    #[test]
    fn constant_feature_has_no_candidate() {
        let x = array![[5.0], [5.0], [5.0]];
        let params = SplitParams {
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 0.0,
        };
        assert!(find_best_split(x.view(), &[1.0, -1.0, 1.0], &[0.25; 3], &[0, 1, 2], &params).is_none());
    }

    #[test]
    fn min_child_weight_blocks_thin_children() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        let grad = [1.0, 1.0, 1.0, -1.0];
        let mut params = SplitParams {
            lambda: 0.0,
            gamma: 0.0,
            min_child_weight: 0.0,
        };
        let free = find_best_split(x.view(), &grad, &[0.25; 4], &[0, 1, 2, 3], &params).unwrap();
        assert_eq!(free.threshold, 2.5);
        params.min_child_weight = 0.5;
        let held = find_best_split(x.view(), &grad, &[0.25; 4], &[0, 1, 2, 3], &params).unwrap();
        assert_eq!(held.threshold, 1.5);
        params.min_child_weight = 0.6;
        assert!(find_best_split(x.view(), &grad, &[0.25; 4], &[0, 1, 2, 3], &params).is_none());
    }
}
