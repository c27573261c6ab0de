use ndarray::ArrayView2;
use rayon::prelude::*;

use super::split::{reduce_candidates, scan_feature, sort_rows_by_feature, SplitParams};
use super::{GbtError, Hyperparams, TreeEnsemble, TreeNode};
use crate::dataset::{EventTable, LabelEncoding};
use crate::{logit, sigmoid, Scalar};

/// Mean logistic loss of margins against 0/1 labels, computed via softplus.
pub fn log_loss<T: Scalar>(margins: &[T], labels: &[usize]) -> T {
    let n = T::from_usize_lossy(margins.len().max(1));
    margins
        .iter()
        .zip(labels)
        .map(|(&m, &y)| {
            let softplus = m.max(T::zero()) + (T::one() + (-m.abs()).exp()).ln();
            if y == 1 {
                softplus - m
            } else {
                softplus
            }
        })
        .sum::<T>()
        / n
}

struct Grower<'a, T: Scalar> {
    x: ArrayView2<'a, T>,
    grad: &'a [T],
    hess: &'a [T],
    margins: &'a mut [T],
    params: SplitParams<T>,
    learning_rate: T,
    max_depth: usize,
    goes_left: Vec<bool>,
}

impl<T: Scalar> Grower<'_, T> {
    /// `rows` ascending by index; `sorted[f]` the same rows ascending by
    /// feature `f`.
    fn grow(&mut self, rows: Vec<u32>, sorted: Vec<Vec<u32>>, depth: usize) -> TreeNode<T> {
        let total_grad: T = rows.iter().map(|&r| self.grad[r as usize]).sum();
        let total_hess: T = rows.iter().map(|&r| self.hess[r as usize]).sum();

        if depth < self.max_depth {
            let (x, grad, hess, params) = (self.x, self.grad, self.hess, &self.params);
            let per_feature: Vec<_> = sorted
                .par_iter()
                .enumerate()
                .map(|(f, s)| scan_feature(x, f, s, grad, hess, total_grad, total_hess, params))
                .collect();
            if let Some(best) = reduce_candidates(per_feature).filter(|b| b.gain > T::zero()) {
                for &r in &rows {
                    self.goes_left[r as usize] = x[[r as usize, best.feature]] < best.threshold;
                }
                let mask = &self.goes_left;
                let (left_rows, right_rows): (Vec<u32>, Vec<u32>) =
                    rows.iter().partition(|&&r| mask[r as usize]);
                let (left_sorted, right_sorted): (Vec<Vec<u32>>, Vec<Vec<u32>>) = sorted
                    .into_par_iter()
                    .map(|s| s.into_iter().partition(|&r| mask[r as usize]))
                    .unzip();
                let left = self.grow(left_rows, left_sorted, depth + 1);
                let right = self.grow(right_rows, right_sorted, depth + 1);
                return TreeNode::split(best.feature, best.threshold, left, right);
            }
        }

        let denom = total_hess + self.params.lambda;
        let weight = if denom > T::zero() {
            -self.learning_rate * total_grad / denom
        } else {
            T::zero()
        };
        for &r in &rows {
            self.margins[r as usize] += weight;
        }
        TreeNode::leaf(weight)
    }
}

/// Runs `hp.rounds` boosting rounds on raw features and 0/1 labels and
/// returns `(base_margin, trees)`. Accepts single-class input.
pub fn boost<T: Scalar>(
    x: ArrayView2<'_, T>,
    labels: &[usize],
    hp: &Hyperparams,
) -> Result<(T, Vec<TreeNode<T>>), GbtError> {
    hp.validate()?;
    let (n, f) = x.dim();
    if labels.len() != n {
        return Err(GbtError::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    if let Some(&bad) = labels.iter().find(|&&y| y > 1) {
        return Err(GbtError::BadLabel(bad));
    }
    if let Some(((row, col), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(GbtError::NonFiniteFeature { row, col });
    }

    let base_margin = logit(T::lit(hp.base_score));
    let mut margins = vec![base_margin; n];
    let all_rows: Vec<u32> = (0..n as u32).collect();
    let presorted: Vec<Vec<u32>> = (0..f)
        .into_par_iter()
        .map(|j| sort_rows_by_feature(x, j, &all_rows))
        .collect();
    let targets: Vec<T> = labels.iter().map(|&y| T::from_usize_lossy(y)).collect();
    let params = SplitParams {
        lambda: T::lit(hp.lambda),
        gamma: T::lit(hp.gamma),
        min_child_weight: T::lit(hp.min_child_weight),
    };

    let mut trees = Vec::with_capacity(hp.rounds);
    let mut grad = vec![T::zero(); n];
    let mut hess = vec![T::zero(); n];
    let mut goes_left = vec![false; n];
    for _ in 0..hp.rounds {
        for i in 0..n {
            let p = sigmoid(margins[i]);
            grad[i] = p - targets[i];
            hess[i] = p * (T::one() - p);
        }
        let mut grower = Grower {
            x,
            grad: &grad,
            hess: &hess,
            margins: &mut margins,
            params,
            learning_rate: T::lit(hp.learning_rate),
            max_depth: hp.max_depth,
            goes_left,
        };
        let tree = grower.grow(all_rows.clone(), presorted.clone(), 0);
        goes_left = grower.goes_left;
        trees.push(tree);
    }
    Ok((base_margin, trees))
}

/// Trains a binary classifier on a table whose labels are encoded as 0/1.
pub fn train<T: Scalar>(
    table: &EventTable<T>,
    codes: &[usize],
    hp: &Hyperparams,
) -> Result<TreeEnsemble<T>, GbtError> {
    if codes.len() != table.n_rows() {
        return Err(GbtError::DimensionMismatch {
            expected: table.n_rows(),
            found: codes.len(),
        });
    }
    let has = |c| codes.contains(&c);
    if !(has(0) && has(1)) {
        return Err(GbtError::SingleClassInput);
    }
    let (base_margin, trees) = boost(table.values().view(), codes, hp)?;

    let encoding = LabelEncoding::from_classes(table.labels().iter().copied());
    // codes may come from a different encoder; only record classes when they agree
    let classes = match encoding.encode(table.labels()) {
        Some(mine) if mine == codes => encoding.classes().to_vec(),
        _ => Vec::new(),
    };
    Ok(TreeEnsemble {
        hyperparams: *hp,
        base_margin,
        trees,
        feature_names: table.feature_names().to_vec(),
        classes,
        seed: 0,
    })
}
