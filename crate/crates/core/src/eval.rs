//! Confusion matrices, classification reports and Pearson correlation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{EventTable, FeatureName};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("y_true has {0} entries, y_pred has {1}")]
    LengthMismatch(usize, usize),
    #[error("class code {code} is not below K = {k}")]
    CodeOutOfRange { code: usize, k: usize },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
}

/// `counts[i][j]` = rows of actual class `i` predicted as class `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Builds a matrix from explicit counts with labels `"0".."K-1"`.
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        let labels = (0..counts.len()).map(|i| i.to_string()).collect();
        ConfusionMatrix { labels, counts }
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        self.labels = labels;
        self
    }

    /// Aligned text table, actual classes down, predicted across.
    pub fn to_text(&self) -> String {
        let width = self
            .labels
            .iter()
            .map(String::len)
            .chain(self.counts.iter().flatten().map(|c| c.to_string().len()))
            .max()
            .unwrap_or(1)
            .max(6);
        let mut out = String::new();
        let _ = write!(out, "{:>width$}", "actual\\pred", width = width.max(11));
        for l in &self.labels {
            let _ = write!(out, "  {l:>width$}");
        }
        out.push('\n');
        for (l, row) in self.labels.iter().zip(&self.counts) {
            let _ = write!(out, "{:>width$}", l, width = width.max(11));
            for c in row {
                let _ = write!(out, "  {c:>width$}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion(y_true: &[usize], y_pred: &[usize], k: usize) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch(y_true.len(), y_pred.len()));
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        for code in [t, p] {
            if code >= k {
                return Err(EvalError::CodeOutOfRange { code, k });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix::from_counts(counts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when precision or recall had an empty denominator and was set to 0.
    pub zero_division: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragedMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_avg: AveragedMetrics,
    pub weighted_avg: AveragedMetrics,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

pub fn report(cm: &ConfusionMatrix) -> Result<EvalReport, EvalError> {
    let k = cm.k();
    let total = cm.total();
    if k == 0 || total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let mut classes = Vec::with_capacity(k);
    for i in 0..k {
        let tp = cm.counts[i][i];
        let row: u64 = cm.counts[i].iter().sum();
        let col: u64 = cm.counts.iter().map(|r| r[i]).sum();
        let (precision, pz) = ratio(tp, col);
        let (recall, rz) = ratio(tp, row);
        classes.push(ClassMetrics {
            label: cm.labels.get(i).cloned().unwrap_or_else(|| i.to_string()),
            precision,
            recall,
            f1: f1_score(precision, recall),
            support: row,
            zero_division: pz || rz,
        });
    }
    let trace: u64 = (0..k).map(|i| cm.counts[i][i]).sum();
    let kf = k as f64;
    let tf = total as f64;
    let avg = |pick: fn(&ClassMetrics) -> f64| -> (f64, f64) {
        let macro_ = classes.iter().map(pick).sum::<f64>() / kf;
        let weighted = classes
            .iter()
            .map(|c| pick(c) * c.support as f64)
            .sum::<f64>()
            / tf;
        (macro_, weighted)
    };
    let (mp, wp) = avg(|c| c.precision);
    let (mr, wr) = avg(|c| c.recall);
    let (mf, wf) = avg(|c| c.f1);
    Ok(EvalReport {
        classes,
        accuracy: trace as f64 / tf,
        macro_avg: AveragedMetrics {
            precision: mp,
            recall: mr,
            f1: mf,
        },
        weighted_avg: AveragedMetrics {
            precision: wp,
            recall: wr,
            f1: wf,
        },
        total,
    })
}

impl EvalReport {
    /// Classification report with two-decimal metrics.
    pub fn to_text(&self) -> String {
        let name_w = self
            .classes
            .iter()
            .map(|c| c.label.len())
            .chain(["weighted avg".len()])
            .max()
            .unwrap_or(12);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>name_w$}  {:>9}  {:>9}  {:>9}  {:>9}",
            "", "precision", "recall", "f1-score", "support"
        );
        out.push('\n');
        for c in &self.classes {
            let _ = writeln!(
                out,
                "{:>name_w$}  {:>9.2}  {:>9.2}  {:>9.2}  {:>9}",
                c.label, c.precision, c.recall, c.f1, c.support
            );
        }
        out.push('\n');
        let _ = writeln!(
            out,
            "{:>name_w$}  {:>9}  {:>9}  {:>9.2}  {:>9}",
            "accuracy", "", "", self.accuracy, self.total
        );
        for (name, a) in [("macro avg", &self.macro_avg), ("weighted avg", &self.weighted_avg)] {
            let _ = writeln!(
                out,
                "{:>name_w$}  {:>9.2}  {:>9.2}  {:>9.2}  {:>9}",
                name, a.precision, a.recall, a.f1, self.total
            );
        }
        if self.classes.iter().any(|c| c.zero_division) {
            out.push_str("\n(some metrics had an empty denominator and were set to 0)\n");
        }
        out
    }
}

/// Pairwise Pearson coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct CorrelationMatrix<T: Scalar> {
    pub names: Vec<FeatureName>,
    /// Row-major `F x F`.
    pub values: Vec<Vec<T>>,
    /// Columns with zero variance; their off-diagonal entries are 0.
    pub constant: Vec<bool>,
}

impl<T: Scalar> CorrelationMatrix<T> {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[i][j]
    }
}

/// Pearson correlation between the named columns.
///
/// The diagonal is 1 for every column, including constant ones, which are
/// listed in `constant`.
pub fn pearson<T: Scalar, S: AsRef<str>>(
    table: &EventTable<T>,
    features: &[S],
) -> Result<CorrelationMatrix<T>, EvalError> {
    if table.n_rows() < 2 {
        return Err(EvalError::TooFewRows(table.n_rows()));
    }
    let idx = features
        .iter()
        .map(|f| {
            table
                .feature_index(f.as_ref())
                .ok_or_else(|| EvalError::UnknownFeature(f.as_ref().to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = T::from_usize_lossy(table.n_rows());
    let centered: Vec<Vec<T>> = idx
        .iter()
        .map(|&j| {
            let col = table.column(j);
            let mean = col.iter().copied().sum::<T>() / n;
            col.iter().map(|&x| x - mean).collect()
        })
        .collect();
    let norms: Vec<T> = centered
        .iter()
        .map(|c| c.iter().map(|&d| d * d).sum::<T>().sqrt())
        .collect();
    let constant: Vec<bool> = centered
        .iter()
        .zip(&norms)
        .map(|(c, &norm)| {
            // exact zero, or pure rounding residue of a constant column
            norm == T::zero() || c.windows(2).all(|w| w[0] == w[1])
        })
        .collect();
    let f = idx.len();
    let mut values = vec![vec![T::zero(); f]; f];
    for a in 0..f {
        values[a][a] = T::one();
        for b in (a + 1)..f {
            let r = if constant[a] || constant[b] {
                T::zero()
            } else {
                let dot: T = centered[a].iter().zip(&centered[b]).map(|(&x, &y)| x * y).sum();
                (dot / (norms[a] * norms[b])).max(-T::one()).min(T::one())
            };
            values[a][b] = r;
            values[b][a] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: idx.iter().map(|&j| table.feature_names()[j].clone()).collect(),
        values,
        constant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{EventClass, Provenance};
    use ndarray::Array2;

    #[test]
    fn confusion_counts() {
        let cm = confusion(&[0, 1, 1], &[0, 1, 0], 2).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0], vec![1, 1]]);
        let cm = confusion(&[0, 1, 2, 1], &[0, 1, 2, 1], 3).unwrap();
        assert_eq!(cm.counts, vec![vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 1]]);
    }

    #[test]
    fn confusion_errors() {
        assert!(matches!(confusion(&[0], &[0, 1], 2), Err(EvalError::LengthMismatch(1, 2))));
        assert!(matches!(
            confusion(&[0, 2], &[0, 1], 2),
            Err(EvalError::CodeOutOfRange { code: 2, k: 2 })
        ));
    }

    #[test]
    fn report_hand_computed() {
        let r = report(&ConfusionMatrix::from_counts(vec![vec![8, 2], vec![1, 9]])).unwrap();
        assert!((r.classes[0].precision - 8.0 / 9.0).abs() < 1e-12);
        assert!((r.classes[0].recall - 0.8).abs() < 1e-12);
        assert!((r.classes[0].f1 - 0.842105263).abs() < 1e-8);
        assert!((r.accuracy - 0.85).abs() < 1e-12);
    }

    #[test]
    fn report_identity() {
        let r = report(&ConfusionMatrix::from_counts(vec![vec![5, 0], vec![0, 5]])).unwrap();
        for c in &r.classes {
            assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        }
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn zero_division_is_flagged() {
        let r = report(&ConfusionMatrix::from_counts(vec![vec![0, 3], vec![0, 7]])).unwrap();
        assert_eq!(r.classes[0].precision, 0.0);
        assert!(r.classes[0].zero_division);
        assert!(!r.classes[1].zero_division);
        assert!(r.to_text().contains("empty denominator"));
        assert!(matches!(
            report(&ConfusionMatrix::from_counts(vec![vec![0, 0], vec![0, 0]])),
            Err(EvalError::EmptyMatrix)
        ));
    }

    #[test]
    fn text_report_rounds_to_two_decimals() {
        let r = report(&ConfusionMatrix::from_counts(vec![vec![29, 147], vec![0, 783]])).unwrap();
        let text = r.to_text();
        let line = text.lines().find(|l| l.trim_start().starts_with("1 ")).unwrap();
        let fields: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(fields, vec!["1", "0.84", "1.00", "0.91", "783"]);
        assert!(text.contains("0.85"));
    }

    fn table(cols: &[(&str, Vec<f64>)]) -> EventTable<f64> {
        let n = cols[0].1.len();
        EventTable::new(
            cols.iter().map(|(name, _)| FeatureName::column(name)).collect(),
            Array2::from_shape_fn((n, cols.len()), |(i, j)| cols[j].1[i]),
            vec![EventClass::Attack; n],
            Provenance::synthetic(n),
        )
        .unwrap()
    }

    #[test]
    fn pearson_extremes() {
        let x = vec![1.0, 2.0, 4.0, 7.0];
        let t = table(&[
            ("x", x.clone()),
            ("2x", x.iter().map(|v| 2.0 * v).collect()),
            ("-x", x.iter().map(|v| -v).collect()),
            ("c", vec![3.0; 4]),
        ]);
        let c = pearson(&t, &["x", "2x", "-x", "c"]).unwrap();
        assert!((c.get(0, 1) - 1.0).abs() < 1e-15);
        assert!((c.get(0, 2) + 1.0).abs() < 1e-15);
        assert_eq!(c.get(0, 3), 0.0);
        assert_eq!(c.get(3, 3), 1.0);
        assert_eq!(c.constant, vec![false, false, false, true]);
        assert!(matches!(pearson(&t, &["nope"]), Err(EvalError::UnknownFeature(_))));
    }

    #[test]
    fn pearson_needs_two_rows() {
        let t = table(&[("x", vec![1.0])]);
        assert!(matches!(pearson(&t, &["x"]), Err(EvalError::TooFewRows(1))));
    }
}
