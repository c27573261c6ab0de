use std::collections::HashSet;
use std::path::PathBuf;

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use super::{DatasetError, EventClass, FeatureName};
use crate::Scalar;

/// Where the rows of a table came from.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Option<PathBuf>,
    /// Zero-based data-row index in the source for each retained row.
    pub rows: Vec<usize>,
}

impl Provenance {
    pub fn synthetic(n: usize) -> Self {
        Provenance {
            source: None,
            rows: (0..n).collect(),
        }
    }
}

/// Immutable, cleaned table of PMU measurements with one event class per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTable<T> {
    feature_names: Vec<FeatureName>,
    values: Array2<T>,
    labels: Vec<EventClass>,
    provenance: Provenance,
}

impl<T: Scalar> EventTable<T> {
    /// Validates shape, finiteness and name uniqueness.
    pub fn new(
        feature_names: Vec<FeatureName>,
        values: Array2<T>,
        labels: Vec<EventClass>,
        provenance: Provenance,
    ) -> Result<Self, DatasetError> {
        let (rows, cols) = values.dim();
        if cols != feature_names.len() {
            return Err(DatasetError::Shape(format!(
                "{} names for {} columns",
                feature_names.len(),
                cols
            )));
        }
        if rows != labels.len() {
            return Err(DatasetError::Shape(format!(
                "{} labels for {} rows",
                labels.len(),
                rows
            )));
        }
        if rows != provenance.rows.len() {
            return Err(DatasetError::Shape(format!(
                "{} provenance rows for {} rows",
                provenance.rows.len(),
                rows
            )));
        }
        let mut seen = HashSet::with_capacity(cols);
        for name in &feature_names {
            if !seen.insert(name.raw()) {
                return Err(DatasetError::DuplicateFeature(name.raw().to_string()));
            }
        }
        if let Some(((row, col), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(DatasetError::NonFinite { row, col });
        }
        Ok(EventTable {
            feature_names,
            values: values.as_standard_layout().into_owned(),
            labels,
            provenance,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn feature_names(&self) -> &[FeatureName] {
        &self.feature_names
    }

    pub fn values(&self) -> &Array2<T> {
        &self.values
    }

    pub fn labels(&self) -> &[EventClass] {
        &self.labels
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn row(&self, i: usize) -> &[T] {
        let start = i * self.n_features();
        &self.values.as_slice().expect("standard layout")[start..start + self.n_features()]
    }

    pub fn column(&self, j: usize) -> ArrayView1<'_, T> {
        self.values.column(j)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n.raw() == name)
    }

    /// Row counts per class, indexed by [`EventClass::index`].
    pub fn class_counts(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for l in &self.labels {
            counts[l.index() as usize] += 1;
        }
        counts
    }

    /// Sub-table of the given rows in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> EventTable<T> {
        EventTable {
            feature_names: self.feature_names.clone(),
            values: self.values.select(Axis(0), rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            provenance: Provenance {
                source: self.provenance.source.clone(),
                rows: rows.iter().map(|&r| self.provenance.rows[r]).collect(),
            },
        }
    }

    /// Sub-table restricted to the named columns, in the order given.
    pub fn select_features<S: AsRef<str>>(&self, names: &[S]) -> Result<EventTable<T>, DatasetError> {
        let idx = names
            .iter()
            .map(|n| {
                self.feature_index(n.as_ref())
                    .ok_or_else(|| DatasetError::UnknownFeature(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let feature_names = idx.iter().map(|&j| self.feature_names[j].clone()).collect();
        let values = self.values.select(Axis(1), &idx);
        EventTable::new(feature_names, values, self.labels.clone(), self.provenance.clone())
    }

    /// Same rows and labels with replaced values (used by scaling).
    pub fn with_values(&self, values: Array2<T>) -> Result<EventTable<T>, DatasetError> {
        EventTable::new(
            self.feature_names.clone(),
            values,
            self.labels.clone(),
            self.provenance.clone(),
        )
    }

    /// Converts to another precision.
    pub fn cast<U: Scalar>(&self) -> Result<EventTable<U>, DatasetError> {
        let values = self
            .values
            .mapv(|v| U::from_f64(v.as_f64()).unwrap_or_else(U::nan));
        EventTable::new(
            self.feature_names.clone(),
            values,
            self.labels.clone(),
            self.provenance.clone(),
        )
    }
}
