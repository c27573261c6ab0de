//! Second-order gradient-boosted regression trees with logistic loss for
//! binary event classification.
//!
//! Each round fits one tree to the gradient `p - y` and hessian `p (1 - p)` of
//! the log loss at the current margins, using exact greedy splits over the
//! midpoints between consecutive distinct feature values. Rows go left iff
//! `x[feature] < threshold`.

pub mod split;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{EventClass, FeatureName};
use crate::{sigmoid, Scalar};

pub use train::{boost, log_loss, train};

#[derive(Debug, Error)]
pub enum GbtError {
    #[error("training labels contain a single class")]
    SingleClassInput,
    #[error("label code {0} is not 0 or 1")]
    BadLabel(usize),
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid hyperparameter: {0}")]
    BadHyperparam(String),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Boosting hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// Minimum gain required to keep a split.
    pub gamma: f64,
    /// Minimum hessian sum in each child.
    pub min_child_weight: f64,
    pub base_score: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            rounds: 200,
            learning_rate: 0.1,
            max_depth: 4,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            base_score: 0.5,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), GbtError> {
        let bad = |m: &str| Err(GbtError::BadHyperparam(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if !(self.lambda >= 0.0) {
            return bad("lambda must be >= 0");
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma must be >= 0");
        }
        if !(self.min_child_weight >= 0.0) {
            return bad("min_child_weight must be >= 0");
        }
        if !(self.base_score > 0.0 && self.base_score < 1.0) {
            return bad("base_score must lie in (0, 1)");
        }
        Ok(())
    }
}

/// A regression tree node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", bound = "")]
pub enum TreeNode<T: Scalar> {
    Split {
        feature_index: usize,
        threshold: T,
        /// Kept for files that may carry missing values; finite inputs never
        /// consult it.
        default_left: bool,
        left: Box<TreeNode<T>>,
        right: Box<TreeNode<T>>,
    },
    Leaf {
        weight: T,
    },
}

impl<T: Scalar> TreeNode<T> {
    pub fn leaf(weight: T) -> Self {
        TreeNode::Leaf { weight }
    }

    pub fn split(feature_index: usize, threshold: T, left: TreeNode<T>, right: TreeNode<T>) -> Self {
        TreeNode::Split {
            feature_index,
            threshold,
            default_left: true,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    /// Weight of the leaf `row` routes to.
    pub fn predict(&self, row: &[T]) -> T {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight } => return *weight,
                TreeNode::Split {
                    feature_index,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row[*feature_index] < *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// Number of split levels on the longest path.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Largest feature index referenced, if any split exists.
    pub fn max_feature(&self) -> Option<usize> {
        match self {
            TreeNode::Leaf { .. } => None,
            TreeNode::Split {
                feature_index,
                left,
                right,
                ..
            } => [Some(*feature_index), left.max_feature(), right.max_feature()]
                .into_iter()
                .flatten()
                .max(),
        }
    }

    /// Calls `f` on every split's feature index.
    pub fn for_each_split(&self, f: &mut impl FnMut(usize, T)) {
        if let TreeNode::Split {
            feature_index,
            threshold,
            left,
            right,
            ..
        } = self
        {
            f(*feature_index, *threshold);
            left.for_each_split(f);
            right.for_each_split(f);
        }
    }
}

/// A trained boosted ensemble. The margin of a row is `base_margin` plus the
/// routed leaf weight of every tree, summed in tree order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct TreeEnsemble<T: Scalar> {
    pub hyperparams: Hyperparams,
    pub base_margin: T,
    pub trees: Vec<TreeNode<T>>,
    pub feature_names: Vec<FeatureName>,
    /// Class for code 0 and code 1, in that order.
    pub classes: Vec<EventClass>,
    pub seed: u64,
}

impl<T: Scalar> TreeEnsemble<T> {
    /// Wraps hand-built trees; feature names default to `f0, f1, ...`.
    pub fn from_trees(base_margin: T, trees: Vec<TreeNode<T>>, feature_count: usize) -> Self {
        TreeEnsemble {
            hyperparams: Hyperparams::default(),
            base_margin,
            trees,
            feature_names: (0..feature_count)
                .map(|j| FeatureName::column(&format!("f{j}")))
                .collect(),
            classes: Vec::new(),
            seed: 0,
        }
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    /// Deepest tree in the ensemble.
    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(TreeNode::depth).max().unwrap_or(0)
    }

    pub fn check_row(&self, row: &[T]) -> Result<(), GbtError> {
        if row.len() != self.feature_count() {
            return Err(GbtError::DimensionMismatch {
                expected: self.feature_count(),
                found: row.len(),
            });
        }
        Ok(())
    }

    /// Margin without the dimension check.
    #[inline]
    pub fn margin_unchecked(&self, row: &[T]) -> T {
        let mut m = self.base_margin;
        for tree in &self.trees {
            m += tree.predict(row);
        }
        m
    }

    /// Log-odds output for one row.
    pub fn predict_margin(&self, row: &[T]) -> Result<T, GbtError> {
        self.check_row(row)?;
        Ok(self.margin_unchecked(row))
    }

    pub fn predict_proba(&self, row: &[T]) -> Result<T, GbtError> {
        self.predict_margin(row).map(sigmoid)
    }

    /// Code 1 iff the probability is at least `cutoff`.
    pub fn predict_class(&self, row: &[T], cutoff: T) -> Result<usize, GbtError> {
        Ok(usize::from(self.predict_proba(row)? >= cutoff))
    }

    /// Checks that every split references a valid feature.
    pub fn validate(&self) -> Result<(), GbtError> {
        for tree in &self.trees {
            if let Some(f) = tree.max_feature() {
                if f >= self.feature_count() {
                    return Err(GbtError::DimensionMismatch {
                        expected: self.feature_count(),
                        found: f + 1,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, GbtError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, GbtError> {
        let model: TreeEnsemble<T> = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }
}
