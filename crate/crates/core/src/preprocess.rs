//! Seeded train/test splitting and standardization.
//!
//! Shuffles use ChaCha8 seeded through `seed_from_u64`, with Fisher–Yates
//! swaps drawn by Lemire's nearly-divisionless bounded sampling on
//! `next_u64`. Both are fixed so partitions never change across platforms or
//! crate upgrades.

use ndarray::{Array2, Axis, Zip};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetError, EventTable};
use crate::Scalar;

/// Columns whose population standard deviation falls below this are constant.
pub const CONSTANT_EPSILON: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("need at least 2 rows to split, got {0}")]
    TooFewRows(usize),
    #[error("train fraction must lie in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("scaler has {expected} columns, table has {found}")]
    ColumnMismatch { expected: usize, found: usize },
    #[error("cannot fit a scaler on an empty table")]
    EmptyTable,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    /// Split each class separately; off unless asked for.
    #[serde(default)]
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 42,
            stratified: false,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if self.train_fraction > 0.0 && self.train_fraction < 1.0 {
            Ok(())
        } else {
            Err(PreprocessError::BadFraction(self.train_fraction))
        }
    }
}

/// Uniform integer in `0..bound` (Lemire). `bound` must be non-zero.
fn bounded(rng: &mut ChaCha8Rng, bound: u64) -> u64 {
    let mut m = (rng.next_u64() as u128) * (bound as u128);
    let mut low = m as u64;
    if low < bound {
        let threshold = bound.wrapping_neg() % bound;
        while low < threshold {
            m = (rng.next_u64() as u128) * (bound as u128);
            low = m as u64;
        }
    }
    (m >> 64) as u64
}

/// Fisher–Yates permutation of `0..n`.
pub fn shuffled_indices(n: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = bounded(&mut rng, i as u64 + 1) as usize;
        idx.swap(i, j);
    }
    idx
}

/// Number of training rows for `n` rows: `floor(n * fraction)`.
pub fn train_size(n: usize, fraction: f64) -> usize {
    (n as f64 * fraction).floor() as usize
}

/// Row indices for the train and test parts, in shuffled order.
pub fn split_indices<T: Scalar>(
    table: &EventTable<T>,
    spec: &SplitSpec,
) -> Result<(Vec<usize>, Vec<usize>), PreprocessError> {
    spec.validate()?;
    let n = table.n_rows();
    if n < 2 {
        return Err(PreprocessError::TooFewRows(n));
    }
    if !spec.stratified {
        let order = shuffled_indices(n, spec.seed);
        let cut = train_size(n, spec.train_fraction);
        return Ok((order[..cut].to_vec(), order[cut..].to_vec()));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in crate::dataset::EventClass::ALL {
        let members: Vec<usize> = table
            .labels()
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == class)
            .map(|(i, _)| i)
            .collect();
        if members.is_empty() {
            continue;
        }
        let order = shuffled_indices(members.len(), spec.seed ^ (class.index() as u64 + 1));
        let cut = train_size(members.len(), spec.train_fraction);
        train.extend(order[..cut].iter().map(|&k| members[k]));
        test.extend(order[cut..].iter().map(|&k| members[k]));
    }
    Ok((train, test))
}

/// Seeded shuffle split; the first `floor(R * f)` shuffled rows train.
pub fn split<T: Scalar>(
    table: &EventTable<T>,
    spec: &SplitSpec,
) -> Result<(EventTable<T>, EventTable<T>), PreprocessError> {
    let (train, test) = split_indices(table, spec)?;
    Ok((table.select_rows(&train), table.select_rows(&test)))
}

/// Up to `k` distinct row indices drawn with a fixed seed.
pub fn sample_rows(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order = shuffled_indices(n, seed);
    order.truncate(k.min(n));
    order
}

/// Per-column mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ScalerParams<T: Scalar> {
    pub means: Vec<T>,
    pub stds: Vec<T>,
    pub constant_flags: Vec<bool>,
}

impl<T: Scalar> ScalerParams<T> {
    pub fn identity(columns: usize) -> Self {
        ScalerParams {
            means: vec![T::zero(); columns],
            stds: vec![T::one(); columns],
            constant_flags: vec![false; columns],
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// Standardizes one value of column `j`.
    #[inline]
    pub fn apply(&self, j: usize, x: T) -> T {
        if self.constant_flags[j] {
            T::zero()
        } else {
            (x - self.means[j]) / self.stds[j]
        }
    }

    /// Restricts to the given columns, in that order.
    pub fn select(&self, columns: &[usize]) -> Self {
        ScalerParams {
            means: columns.iter().map(|&j| self.means[j]).collect(),
            stds: columns.iter().map(|&j| self.stds[j]).collect(),
            constant_flags: columns.iter().map(|&j| self.constant_flags[j]).collect(),
        }
    }
}

/// Fits column statistics on the training rows.
pub fn fit_scaler<T: Scalar>(train: &EventTable<T>) -> Result<ScalerParams<T>, PreprocessError> {
    if train.n_rows() == 0 {
        return Err(PreprocessError::EmptyTable);
    }
    Ok(fit_columns(train.values()))
}

pub(crate) fn fit_columns<T: Scalar>(values: &Array2<T>) -> ScalerParams<T> {
    let n = T::from_usize_lossy(values.nrows());
    let eps = T::lit(CONSTANT_EPSILON);
    let mut params = ScalerParams {
        means: Vec::with_capacity(values.ncols()),
        stds: Vec::with_capacity(values.ncols()),
        constant_flags: Vec::with_capacity(values.ncols()),
    };
    for col in values.axis_iter(Axis(1)) {
        let mean = col.iter().copied().sum::<T>() / n;
        let var = col.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / n;
        let std = var.sqrt();
        params.means.push(mean);
        params.stds.push(std);
        params.constant_flags.push(std < eps);
    }
    params
}

/// Applies `(x - mean) / std` per column; constant columns become 0.
pub fn transform<T: Scalar>(
    params: &ScalerParams<T>,
    table: &EventTable<T>,
) -> Result<EventTable<T>, PreprocessError> {
    if params.len() != table.n_features() {
        return Err(PreprocessError::ColumnMismatch {
            expected: params.len(),
            found: table.n_features(),
        });
    }
    let mut values = table.values().clone();
    Zip::from(values.axis_iter_mut(Axis(1)))
        .and(&ndarray::Array1::from_iter(0..params.len()))
        .par_for_each(|mut col, &j| col.mapv_inplace(|x| params.apply(j, x)));
    Ok(table.with_values(values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{EventClass, FeatureName, Provenance};
    use approx::assert_abs_diff_eq;

    fn table(cols: &[&[f64]]) -> EventTable<f64> {
        let rows = cols.first().map_or(0, |c| c.len());
        let values = Array2::from_shape_fn((rows, cols.len()), |(i, j)| cols[j][i]);
        EventTable::new(
            (0..cols.len())
                .map(|j| FeatureName::column(&format!("c{j}")))
                .collect(),
            values,
            (0..rows)
                .map(|i| if i % 2 == 0 { EventClass::Attack } else { EventClass::Natural })
                .collect(),
            Provenance::synthetic(rows),
        )
        .unwrap()
    }

    #[test]
    fn population_std() {
        let p = fit_scaler(&table(&[&[2.0, 4.0, 6.0]])).unwrap();
        assert_abs_diff_eq!(p.means[0], 4.0);
        // sqrt(8/3)
        assert_abs_diff_eq!(p.stds[0], 1.632993, epsilon = 1e-6);
        assert!(!p.constant_flags[0]);
        let t = transform(&p, &table(&[&[2.0, 4.0, 6.0]])).unwrap();
        let col: Vec<f64> = t.column(0).to_vec();
        assert_abs_diff_eq!(col[0], -1.224745, epsilon = 1e-6);
        assert_abs_diff_eq!(col[1], 0.0);
        assert_abs_diff_eq!(col[2], 1.224745, epsilon = 1e-6);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let t = table(&[&[5.0, 5.0, 5.0], &[1.0, 2.0, 3.0]]);
        let p = fit_scaler(&t).unwrap();
        assert_eq!(p.means[0], 5.0);
        assert_eq!(p.stds[0], 0.0);
        assert!(p.constant_flags[0]);
        let out = transform(&p, &t).unwrap();
        assert!(out.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_feature_set() {
        let values = Array2::<f64>::zeros((3, 0));
        let t = EventTable::new(
            vec![],
            values,
            vec![EventClass::Attack; 3],
            Provenance::synthetic(3),
        )
        .unwrap();
        let p = fit_scaler(&t).unwrap();
        assert!(p.is_empty());
        assert_eq!(transform(&p, &t).unwrap(), t);
    }

    #[test]
    fn identity_params_leave_values() {
        let t = table(&[&[0.3, -7.0, 2.5], &[1.0, 2.0, 3.0]]);
        assert_eq!(transform(&ScalerParams::identity(2), &t).unwrap(), t);
    }

    #[test]
    fn column_mismatch() {
        let t = table(&[&[1.0, 2.0]]);
        assert!(matches!(
            transform(&ScalerParams::<f64>::identity(2), &t),
            Err(PreprocessError::ColumnMismatch { .. })
        ));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let t = table(&[&xs]);
        let spec = SplitSpec {
            train_fraction: 0.8,
            seed: 11,
            stratified: false,
        };
        let (a_train, a_test) = split_indices(&t, &spec).unwrap();
        let (b_train, b_test) = split_indices(&t, &spec).unwrap();
        assert_eq!((a_train.len(), a_test.len()), (8, 2));
        assert_eq!(a_train, b_train);
        assert_eq!(a_test, b_test);
        let mut all: Vec<usize> = a_train.iter().chain(&a_test).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn split_errors() {
        let t = table(&[&[1.0]]);
        assert!(matches!(
            split(&t, &SplitSpec::default()),
            Err(PreprocessError::TooFewRows(1))
        ));
        let t = table(&[&[1.0, 2.0]]);
        let spec = SplitSpec {
            train_fraction: 1.0,
            ..SplitSpec::default()
        };
        assert!(matches!(split(&t, &spec), Err(PreprocessError::BadFraction(_))));
    }

    #[test]
    fn stratified_split_keeps_class_ratio() {
        let xs: Vec<f64> = (0..20).map(f64::from).collect();
        let t = table(&[&xs]);
        let spec = SplitSpec {
            stratified: true,
            ..SplitSpec::default()
        };
        let (train, test) = split(&t, &spec).unwrap();
        assert_eq!(train.class_counts(), [8, 8, 0]);
        assert_eq!(test.class_counts(), [2, 2, 0]);
    }

    #[test]
    fn train_size_floor() {
        assert_eq!(train_size(4966, 0.8), 3972);
        assert_eq!(4966 - train_size(4966, 0.8), 994);
    }

    #[test]
    fn bounded_stays_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = [0usize; 3];
        for _ in 0..3000 {
            seen[bounded(&mut rng, 3) as usize] += 1;
        }
        assert!(seen.iter().all(|&c| c > 900));
    }

    #[test]
    fn sidecar_field_names() {
        let p = fit_scaler(&table(&[&[1.0, 3.0]])).unwrap();
        let json = serde_json::to_value(&p).unwrap();
        assert_eq!(json["means"][0], 2.0);
        assert_eq!(json["stds"][0], 1.0);
        assert_eq!(json["constant_flags"][0], false);
    }
}
