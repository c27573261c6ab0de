//! Exact interventional Shapley values for tree ensembles.
//!
//! The value of a coalition `S` is the mean margin, over background rows
//! `z`, of the hybrid input taking the explained row's values on `S` and
//! `z`'s values elsewhere. For one `(x, z)` pair a leaf is reached by the
//! hybrid iff every feature in `U` (splits where `x` and `z` disagree and the
//! path follows `x`) is in `S` and no feature in `V` (the path follows `z`) is.
//! That indicator game has closed-form Shapley values
//! `(|U|-1)! |V|! / (|U|+|V|)!` for members of `U` and
//! `-|U|! (|V|-1)! / (|U|+|V|)!` for members of `V`, so one traversal per
//! tree and background row gives the exact attribution in time linear in the
//! number of visited nodes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{EventTable, FeatureName};
use crate::gbt::{TreeEnsemble, TreeNode};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum ShapError {
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("background set is empty")]
    EmptyBackground,
    #[error("no explanations given")]
    EmptyInput,
    #[error("k = {k} outside 1..={features}")]
    KOutOfRange { k: usize, features: usize },
    #[error("need at least {needed} rows, got {found}")]
    TooFewRows { needed: usize, found: usize },
    #[error("need at least two features")]
    TooFewFeatures,
    #[error("feature index {0} out of range")]
    FeatureOutOfRange(usize),
}

/// Attribution of one row's margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ShapExplanation<T: Scalar> {
    pub phi: Vec<T>,
    /// Mean background margin.
    pub base_value: T,
    /// Margin of the explained row.
    pub fx: T,
    pub row_ref: usize,
}

impl<T: Scalar> ShapExplanation<T> {
    /// `|base + sum(phi) - fx|`.
    pub fn additivity_error(&self) -> T {
        (self.base_value + self.phi.iter().copied().sum::<T>() - self.fx).abs()
    }
}

/// Features by descending mean |SHAP|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ImportanceRanking<T: Scalar> {
    pub entries: Vec<(FeatureName, T)>,
}

impl<T: Scalar> ImportanceRanking<T> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &FeatureName> {
        self.entries.iter().map(|(n, _)| n)
    }
}

/// `1 / (a * C(a+b, a))` and `1 / (b * C(a+b, b))` for all `a + b <= depth`.
struct CoalitionWeights<T> {
    stride: usize,
    follow_x: Vec<T>,
    follow_z: Vec<T>,
}

impl<T: Scalar> CoalitionWeights<T> {
    fn new(depth: usize) -> Self {
        let stride = depth + 1;
        let mut follow_x = vec![T::zero(); stride * stride];
        let mut follow_z = vec![T::zero(); stride * stride];
        for a in 0..=depth {
            for b in 0..=(depth - a) {
                let binom = binomial::<T>(a + b, a);
                if a > 0 {
                    follow_x[a * stride + b] = T::one() / (T::from_usize_lossy(a) * binom);
                }
                if b > 0 {
                    follow_z[a * stride + b] = T::one() / (T::from_usize_lossy(b) * binom);
                }
            }
        }
        CoalitionWeights {
            stride,
            follow_x,
            follow_z,
        }
    }

    #[inline]
    fn get(&self, a: usize, b: usize) -> (T, T) {
        let i = a * self.stride + b;
        (self.follow_x[i], self.follow_z[i])
    }
}

fn binomial<T: Scalar>(n: usize, k: usize) -> T {
    let k = k.min(n - k);
    let mut acc = T::one();
    for i in 0..k {
        acc = acc * T::from_usize_lossy(n - i) / T::from_usize_lossy(i + 1);
    }
    acc
}

/// Features whose split decision differs between `x` and `z` on the current
/// path, tagged with the side taken (`true` = follow `x`).
struct PathState {
    assigned: Vec<(usize, bool)>,
    n_x: usize,
    n_z: usize,
}

fn traverse<T: Scalar>(
    node: &TreeNode<T>,
    x: &[T],
    z: &[T],
    state: &mut PathState,
    weights: &CoalitionWeights<T>,
    phi: &mut [T],
) {
    match node {
        TreeNode::Leaf { weight } => {
            if state.assigned.is_empty() {
                return;
            }
            let (wx, wz) = weights.get(state.n_x, state.n_z);
            for &(f, follows_x) in &state.assigned {
                if follows_x {
                    phi[f] += *weight * wx;
                } else {
                    phi[f] -= *weight * wz;
                }
            }
        }
        TreeNode::Split {
            feature_index,
            threshold,
            left,
            right,
            ..
        } => {
            let f = *feature_index;
            let x_left = x[f] < *threshold;
            let z_left = z[f] < *threshold;
            let child = |go_left: bool| if go_left { left } else { right };
            if let Some(&(_, follows_x)) = state.assigned.iter().find(|(g, _)| *g == f) {
                let go_left = if follows_x { x_left } else { z_left };
                traverse(child(go_left), x, z, state, weights, phi);
            } else if x_left == z_left {
                traverse(child(x_left), x, z, state, weights, phi);
            } else {
                state.assigned.push((f, true));
                state.n_x += 1;
                traverse(child(x_left), x, z, state, weights, phi);
                state.n_x -= 1;
                state.assigned.pop();

                state.assigned.push((f, false));
                state.n_z += 1;
                traverse(child(z_left), x, z, state, weights, phi);
                state.n_z -= 1;
                state.assigned.pop();
            }
        }
    }
}

/// Precomputed background statistics for repeated explanations.
pub struct Explainer<'a, T: Scalar> {
    model: &'a TreeEnsemble<T>,
    background: &'a EventTable<T>,
    base_value: T,
    weights: CoalitionWeights<T>,
}

impl<'a, T: Scalar> Explainer<'a, T> {
    pub fn new(model: &'a TreeEnsemble<T>, background: &'a EventTable<T>) -> Result<Self, ShapError> {
        if background.n_rows() == 0 {
            return Err(ShapError::EmptyBackground);
        }
        if background.n_features() != model.feature_count() {
            return Err(ShapError::DimensionMismatch {
                expected: model.feature_count(),
                found: background.n_features(),
            });
        }
        let n = T::from_usize_lossy(background.n_rows());
        let base_value = (0..background.n_rows())
            .map(|b| model.margin_unchecked(background.row(b)))
            .sum::<T>()
            / n;
        Ok(Explainer {
            model,
            background,
            base_value,
            weights: CoalitionWeights::new(model.max_depth()),
        })
    }

    pub fn base_value(&self) -> T {
        self.base_value
    }

    pub fn explain(&self, row: &[T], row_ref: usize) -> Result<ShapExplanation<T>, ShapError> {
        let f = self.model.feature_count();
        if row.len() != f {
            return Err(ShapError::DimensionMismatch {
                expected: f,
                found: row.len(),
            });
        }
        let mut phi = vec![T::zero(); f];
        let mut state = PathState {
            assigned: Vec::with_capacity(self.model.max_depth()),
            n_x: 0,
            n_z: 0,
        };
        for b in 0..self.background.n_rows() {
            let z = self.background.row(b);
            for tree in &self.model.trees {
                traverse(tree, row, z, &mut state, &self.weights, &mut phi);
            }
        }
        let n = T::from_usize_lossy(self.background.n_rows());
        for p in &mut phi {
            *p /= n;
        }
        Ok(ShapExplanation {
            phi,
            base_value: self.base_value,
            fx: self.model.margin_unchecked(row),
            row_ref,
        })
    }

    /// Explains every row of `table`, in order. Rows are processed in
    /// parallel; each result depends only on its own row.
    pub fn explain_table(&self, table: &EventTable<T>) -> Result<Vec<ShapExplanation<T>>, ShapError> {
        (0..table.n_rows())
            .into_par_iter()
            .map(|i| self.explain(table.row(i), i))
            .collect()
    }
}

/// Interventional Shapley values of the margin for one row.
pub fn explain<T: Scalar>(
    model: &TreeEnsemble<T>,
    background: &EventTable<T>,
    row: &[T],
) -> Result<ShapExplanation<T>, ShapError> {
    Explainer::new(model, background)?.explain(row, 0)
}

/// [`explain`] for every row of `table`; `row_ref` is the row index.
pub fn explain_all<T: Scalar>(
    model: &TreeEnsemble<T>,
    background: &EventTable<T>,
    table: &EventTable<T>,
) -> Result<Vec<ShapExplanation<T>>, ShapError> {
    if table.n_rows() > 0 && table.n_features() != model.feature_count() {
        return Err(ShapError::DimensionMismatch {
            expected: model.feature_count(),
            found: table.n_features(),
        });
    }
    Explainer::new(model, background)?.explain_table(table)
}

/// Mean |phi| per feature, descending; ties ordered by feature name.
pub fn mean_abs_shap<T: Scalar>(
    explanations: &[ShapExplanation<T>],
    names: &[FeatureName],
) -> Result<ImportanceRanking<T>, ShapError> {
    if explanations.is_empty() {
        return Err(ShapError::EmptyInput);
    }
    let f = names.len();
    let mut sums = vec![T::zero(); f];
    for e in explanations {
        if e.phi.len() != f {
            return Err(ShapError::DimensionMismatch {
                expected: f,
                found: e.phi.len(),
            });
        }
        for (s, p) in sums.iter_mut().zip(&e.phi) {
            *s += p.abs();
        }
    }
    let n = T::from_usize_lossy(explanations.len());
    let mut entries: Vec<(FeatureName, T)> = names
        .iter()
        .cloned()
        .zip(sums.into_iter().map(|s| s / n))
        .collect();
    entries.sort_by(|(na, a), (nb, b)| {
        b.partial_cmp(a)
            .expect("finite importances")
            .then_with(|| na.cmp(nb))
    });
    Ok(ImportanceRanking { entries })
}

/// First `k` names of the ranking.
pub fn select_top_k<T: Scalar>(
    ranking: &ImportanceRanking<T>,
    k: usize,
) -> Result<Vec<FeatureName>, ShapError> {
    if k == 0 || k > ranking.len() {
        return Err(ShapError::KOutOfRange {
            k,
            features: ranking.len(),
        });
    }
    Ok(ranking.names().take(k).cloned().collect())
}

/// Number of contiguous bins (by the feature's value) used when scoring
/// interaction partners.
pub const INTERACTION_BINS: usize = 10;

/// Average ranks (ties share the mean rank).
fn average_ranks<T: Scalar>(values: &[T]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite"));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation; 0 when either side has no rank variation.
fn spearman<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// Chooses the feature whose values best explain the spread of `phi_j` at
/// fixed `x_j`, for coloring a dependence plot.
///
/// Rows are sorted by `x_j` and cut into [`INTERACTION_BINS`] equal-count
/// bins. Each candidate `k` scores the mean over bins of
/// `spearman(phi_j, x_k)^2 * var(phi_j)`; the highest score wins and ties go
/// to the lowest index.
pub fn interaction_partner<T: Scalar>(
    explanations: &[ShapExplanation<T>],
    table: &EventTable<T>,
    feature: usize,
) -> Result<usize, ShapError> {
    let f = table.n_features();
    if f < 2 {
        return Err(ShapError::TooFewFeatures);
    }
    if feature >= f {
        return Err(ShapError::FeatureOutOfRange(feature));
    }
    let n = table.n_rows();
    if n < INTERACTION_BINS {
        return Err(ShapError::TooFewRows {
            needed: INTERACTION_BINS,
            found: n,
        });
    }
    if explanations.len() != n {
        return Err(ShapError::DimensionMismatch {
            expected: n,
            found: explanations.len(),
        });
    }
    if let Some(e) = explanations.iter().find(|e| e.phi.len() != f) {
        return Err(ShapError::DimensionMismatch {
            expected: f,
            found: e.phi.len(),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        table.row(a)[feature]
            .partial_cmp(&table.row(b)[feature])
            .expect("finite")
    });
    let bins: Vec<&[usize]> = (0..INTERACTION_BINS)
        .map(|b| &order[b * n / INTERACTION_BINS..(b + 1) * n / INTERACTION_BINS])
        .filter(|bin| bin.len() >= 2)
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for k in (0..f).filter(|&k| k != feature) {
        let mut score = 0.0;
        for bin in &bins {
            let phi: Vec<T> = bin.iter().map(|&r| explanations[r].phi[feature]).collect();
            let xk: Vec<T> = bin.iter().map(|&r| table.row(r)[k]).collect();
            let m = phi.iter().map(|p| p.as_f64()).sum::<f64>() / phi.len() as f64;
            let var = phi.iter().map(|p| (p.as_f64() - m).powi(2)).sum::<f64>() / phi.len() as f64;
            let rho = spearman(&phi, &xk);
            score += rho * rho * var;
        }
        score /= bins.len() as f64;
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((k, score));
        }
    }
    Ok(best.expect("at least one candidate").0)
}

/// CSV with columns `row_ref, base_value, fx` followed by one phi column per
/// feature.
pub fn explanations_to_csv<T: Scalar>(
    explanations: &[ShapExplanation<T>],
    names: &[FeatureName],
) -> String {
    let mut out = String::from("row_ref,base_value,fx");
    for n in names {
        out.push(',');
        out.push_str(n.raw());
    }
    out.push('\n');
    for e in explanations {
        out.push_str(&format!("{},{},{}", e.row_ref, e.base_value, e.fx));
        for p in &e.phi {
            out.push(',');
            out.push_str(&p.to_string());
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{EventClass, Provenance};
    use ndarray::Array2;

    fn table(rows: &[&[f64]]) -> EventTable<f64> {
        let f = rows[0].len();
        let values = Array2::from_shape_fn((rows.len(), f), |(i, j)| rows[i][j]);
        EventTable::new(
            (0..f).map(|j| FeatureName::column(&format!("f{j}"))).collect(),
            values,
            vec![EventClass::Attack; rows.len()],
            Provenance::synthetic(rows.len()),
        )
        .unwrap()
    }

    #[test]
    fn constant_leaves_give_zero_phi() {
        let m = TreeEnsemble::from_trees(0.3, vec![TreeNode::leaf(1.5), TreeNode::leaf(-0.5)], 2);
        let bg = table(&[&[0.0, 1.0], &[2.0, 3.0]]);
        let e = explain(&m, &bg, &[5.0, 5.0]).unwrap();
        assert_eq!(e.phi, vec![0.0, 0.0]);
        assert_eq!(e.base_value, e.fx);
    }

    #[test]
    fn single_feature_tree_takes_whole_difference() {
        let tree = TreeNode::split(
            1,
            0.0,
            TreeNode::split(1, -1.0, TreeNode::leaf(-2.0), TreeNode::leaf(-1.0)),
            TreeNode::leaf(3.0),
        );
        let m = TreeEnsemble::from_trees(0.0, vec![tree], 3);
        let bg = table(&[&[0.0, -2.0, 1.0], &[1.0, 0.5, 1.0], &[2.0, -0.5, 0.0]]);
        let e = explain(&m, &bg, &[9.0, 4.0, 9.0]).unwrap();
        assert_eq!(e.phi[0], 0.0);
        assert_eq!(e.phi[2], 0.0);
        assert!((e.phi[1] - (e.fx - e.base_value)).abs() < 1e-12);
    }

    #[test]
    fn two_feature_and_gate() {
        // f(x) = 1 iff x0 >= 0.5 and x1 >= 0.5; x = (1,1), z = (0,0):
        // each feature gets 1/2
        let tree = TreeNode::split(
            0,
            0.5,
            TreeNode::leaf(0.0),
            TreeNode::split(1, 0.5, TreeNode::leaf(0.0), TreeNode::leaf(1.0)),
        );
        let m = TreeEnsemble::from_trees(0.0, vec![tree], 2);
        let e = explain(&m, &table(&[&[0.0, 0.0]]), &[1.0, 1.0]).unwrap();
        assert!((e.phi[0] - 0.5).abs() < 1e-15);
        assert!((e.phi[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let m = TreeEnsemble::<f64>::from_trees(0.0, vec![], 2);
        let empty = EventTable::new(
            vec![FeatureName::column("a"), FeatureName::column("b")],
            Array2::zeros((0, 2)),
            vec![],
            Provenance::synthetic(0),
        )
        .unwrap();
        assert!(matches!(explain(&m, &empty, &[0.0, 0.0]), Err(ShapError::EmptyBackground)));
        let bg = table(&[&[0.0, 0.0]]);
        assert!(matches!(
            explain(&m, &bg, &[0.0]),
            Err(ShapError::DimensionMismatch { .. })
        ));
        assert!(explain_all(&m, &bg, &empty).unwrap().is_empty());
    }

    #[test]
    fn ranking_and_top_k() {
        let names: Vec<FeatureName> = ["b", "a", "c"].iter().map(|s| FeatureName::column(s)).collect();
        let es = vec![
            ShapExplanation { phi: vec![1.0, 0.0, 0.5], base_value: 0.0, fx: 1.5, row_ref: 0 },
            ShapExplanation { phi: vec![-3.0, 0.0, -0.5], base_value: 0.0, fx: -3.5, row_ref: 1 },
        ];
        let r = mean_abs_shap(&es, &names).unwrap();
        assert_eq!(r.entries[0].0.raw(), "b");
        assert_eq!(r.entries[0].1, 2.0);
        assert_eq!(r.entries[1], (FeatureName::column("c"), 0.5));
        assert_eq!(select_top_k(&r, 1).unwrap(), vec![FeatureName::column("b")]);
        assert_eq!(select_top_k(&r, 3).unwrap().len(), 3);
        assert!(matches!(select_top_k(&r, 0), Err(ShapError::KOutOfRange { .. })));
        assert!(matches!(select_top_k(&r, 4), Err(ShapError::KOutOfRange { .. })));
        assert!(matches!(mean_abs_shap::<f64>(&[], &names), Err(ShapError::EmptyInput)));
    }

    #[test]
    fn zero_phi_ranks_lexicographically() {
        let names: Vec<FeatureName> = ["z", "m", "a"].iter().map(|s| FeatureName::column(s)).collect();
        let es = vec![ShapExplanation { phi: vec![0.0; 3], base_value: 0.0, fx: 0.0, row_ref: 0 }];
        let r = mean_abs_shap(&es, &names).unwrap();
        let order: Vec<&str> = r.names().map(|n| n.raw()).collect();
        assert_eq!(order, vec!["a", "m", "z"]);
    }

    #[test]
    fn constant_phi_partner_is_lowest_other_index() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * 7 % 5) as f64, (i % 3) as f64]).collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let t = table(&refs);
        let es: Vec<_> = (0..20)
            .map(|i| ShapExplanation { phi: vec![0.25, 0.1, 0.0], base_value: 0.0, fx: 0.35, row_ref: i })
            .collect();
        assert_eq!(interaction_partner(&es, &t, 0).unwrap(), 1);
        assert_eq!(interaction_partner(&es, &t, 1).unwrap(), 0);
        let few = table(&refs[..5]);
        assert!(matches!(
            interaction_partner(&es[..5], &few, 0),
            Err(ShapError::TooFewRows { .. })
        ));
    }

    #[test]
    fn average_ranks_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![2.5, 0.0, 2.5, 1.0]);
    }

    #[test]
    fn csv_layout() {
        let names = vec![FeatureName::column("R1-PM5:I")];
        let es = vec![ShapExplanation { phi: vec![-0.4], base_value: -2.5, fx: -2.9, row_ref: 3 }];
        let csv = explanations_to_csv(&es, &names);
        assert_eq!(csv, "row_ref,base_value,fx,R1-PM5:I\n3,-2.5,-2.9,-0.4\n");
    }
}
