//! The six explanation plot families as standalone SVG files, each paired
//! with a long-format plot-data CSV that reproduces its payload exactly.
//!
//! SHAP plots color positive attributions red and negative ones blue. The
//! correlation heatmap uses a blue-white-red scale anchored at -1, 0 and +1.
//! All attributions are in log-odds.

mod data;
mod svg;

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{EventTable, FeatureName};
use crate::eval::CorrelationMatrix;
use crate::shap::{mean_abs_shap, ImportanceRanking, ShapExplanation};

pub use data::PLOT_DATA_HEADER;

pub const POSITIVE_COLOR: &str = "#ff0051";
pub const NEGATIVE_COLOR: &str = "#008bfb";

/// Number of horizontal bins used when dodging beeswarm points.
pub const BEESWARM_BINS: usize = 60;
/// Largest vertical beeswarm offset, as a fraction of the row height.
pub const BEESWARM_SPREAD: f64 = 0.4;
/// Features shown in a beeswarm plot unless told otherwise.
pub const BEESWARM_MAX_DISPLAY: usize = 20;
/// Features shown individually in a waterfall plot unless told otherwise.
pub const WATERFALL_MAX_FEATURES: usize = 10;

#[derive(Debug, Error)]
pub enum VizError {
    #[error("no explanations given")]
    EmptyInput,
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("expected {expected} values, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("plot data line {line}: {reason}")]
    BadPlotData { line: usize, reason: String },
    #[error("plot data csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    SummaryBar,
    Force,
    Waterfall,
    Beeswarm,
    Dependence,
    Heatmap,
}

impl PlotKind {
    pub const ALL: [PlotKind; 6] = [
        PlotKind::SummaryBar,
        PlotKind::Force,
        PlotKind::Waterfall,
        PlotKind::Beeswarm,
        PlotKind::Dependence,
        PlotKind::Heatmap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::SummaryBar => "summary_bar",
            PlotKind::Force => "force",
            PlotKind::Waterfall => "waterfall",
            PlotKind::Beeswarm => "beeswarm",
            PlotKind::Dependence => "dependence",
            PlotKind::Heatmap => "heatmap",
        }
    }

    pub fn from_name(name: &str) -> Option<PlotKind> {
        PlotKind::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// One feature's contribution to a single-row plot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub label: String,
    pub phi: f64,
    pub feature_value: f64,
}

/// Residual of the features a waterfall does not show individually.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Others {
    pub count: usize,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmPoint {
    /// Index into the plot's feature rows.
    pub feature: usize,
    pub phi: f64,
    /// Vertical offset in row heights, within `[-BEESWARM_SPREAD, BEESWARM_SPREAD]`.
    pub offset: f64,
    /// Percentile of the feature value among the explained rows, in `[0, 1]`.
    pub percentile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependencePoint {
    pub row_ref: usize,
    pub x: f64,
    pub phi: f64,
    /// Percentile of the partner feature's value.
    pub percentile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    /// Bars in display order, top to bottom.
    SummaryBar { bars: Vec<(String, f64)> },
    /// Non-zero contributions by descending `|phi|`.
    Force {
        base: f64,
        fx: f64,
        stripes: Vec<Contribution>,
    },
    /// Steps applied from `base` in order, then `others`, ending at
    /// `base + sum(phi)`.
    Waterfall {
        base: f64,
        fx: f64,
        steps: Vec<Contribution>,
        others: Option<Others>,
    },
    Beeswarm {
        /// Feature rows, most important first, with their mean |phi|.
        features: Vec<(String, f64)>,
        points: Vec<SwarmPoint>,
    },
    Dependence {
        feature: String,
        partner: String,
        points: Vec<DependencePoint>,
    },
    Heatmap {
        labels: Vec<String>,
        values: Vec<Vec<f64>>,
        constant: Vec<bool>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSpec {
    pub title: String,
    pub width: u32,
    pub height: u32,
    pub x_label: String,
    pub y_label: String,
    pub payload: Payload,
}

impl PlotSpec {
    pub fn kind(&self) -> PlotKind {
        match self.payload {
            Payload::SummaryBar { .. } => PlotKind::SummaryBar,
            Payload::Force { .. } => PlotKind::Force,
            Payload::Waterfall { .. } => PlotKind::Waterfall,
            Payload::Beeswarm { .. } => PlotKind::Beeswarm,
            Payload::Dependence { .. } => PlotKind::Dependence,
            Payload::Heatmap { .. } => PlotKind::Heatmap,
        }
    }

    /// Checks that the payload's dimensions agree with each other.
    pub fn validate(&self) -> Result<(), VizError> {
        match &self.payload {
            Payload::Beeswarm { features, points } => {
                if let Some(p) = points.iter().find(|p| p.feature >= features.len()) {
                    return Err(VizError::DimensionMismatch {
                        expected: features.len(),
                        found: p.feature + 1,
                    });
                }
            }
            Payload::Heatmap {
                labels,
                values,
                constant,
            } => {
                let n = labels.len();
                for len in values.iter().map(Vec::len).chain([values.len(), constant.len()]) {
                    if len != n {
                        return Err(VizError::DimensionMismatch {
                            expected: n,
                            found: len,
                        });
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// `(start, end)` of each waterfall bar, `others` last.
    pub fn waterfall_track(&self) -> Option<Vec<(f64, f64)>> {
        let Payload::Waterfall {
            base, steps, others, ..
        } = &self.payload
        else {
            return None;
        };
        let mut at = *base;
        let mut track = Vec::with_capacity(steps.len() + 1);
        for phi in steps.iter().map(|s| s.phi).chain(others.as_ref().map(|o| o.phi)) {
            track.push((at, at + phi));
            at += phi;
        }
        Some(track)
    }

    pub fn to_svg(&self) -> String {
        svg::render(self)
    }

    pub fn to_csv(&self) -> String {
        data::write(self)
    }

    pub fn from_csv(text: &str) -> Result<PlotSpec, VizError> {
        data::read(text)
    }

    /// Writes `<stem>.svg` and `<stem>.csv` into `dir`.
    pub fn write_files(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf), VizError> {
        let svg_path = dir.join(format!("{stem}.svg"));
        let csv_path = dir.join(format!("{stem}.csv"));
        for (path, body) in [(&svg_path, self.to_svg()), (&csv_path, self.to_csv())] {
            std::fs::write(path, body).map_err(|source| VizError::Io {
                path: path.clone(),
                source,
            })?;
        }
        Ok((svg_path, csv_path))
    }
}

/// `<subdataset>_<plotkind>[_<feature>]` with characters outside
/// `[A-Za-z0-9_-]` replaced by `_`.
pub fn file_stem(subdataset: &str, kind: PlotKind, feature: Option<&str>) -> String {
    let mut stem = format!("{subdataset}_{}", kind.name());
    if let Some(f) = feature {
        stem.push('_');
        stem.push_str(f);
    }
    stem.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Fraction of values strictly below plus half of those equal, rescaled so
/// the smallest value maps to 0 and the largest to 1. A single distinct value
/// maps to 0.5.
pub fn percentiles(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    if n < 2 {
        return vec![0.5; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 / (n - 1) as f64;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    if order.first().map(|&a| values[a]) == order.last().map(|&b| values[b]) {
        return vec![0.5; n];
    }
    ranks
}

fn contributions(e: &ShapExplanation<f64>, names: &[FeatureName], row: &[f64]) -> Vec<Contribution> {
    let mut c: Vec<Contribution> = e
        .phi
        .iter()
        .zip(names)
        .zip(row)
        .map(|((&phi, name), &v)| Contribution {
            label: name.raw().to_string(),
            phi,
            feature_value: v,
        })
        .collect();
    c.sort_by(|a, b| b.phi.abs().total_cmp(&a.phi.abs()).then_with(|| a.label.cmp(&b.label)));
    c
}

fn check_lengths(e: &ShapExplanation<f64>, names: &[FeatureName], row: &[f64]) -> Result<(), VizError> {
    for len in [e.phi.len(), row.len()] {
        if len != names.len() {
            return Err(VizError::DimensionMismatch {
                expected: names.len(),
                found: len,
            });
        }
    }
    Ok(())
}

/// Horizontal bars of mean |SHAP| in ranking order. `top_n` is clamped to
/// the ranking length.
pub fn summary_bar(ranking: &ImportanceRanking<f64>, top_n: usize) -> PlotSpec {
    let bars: Vec<(String, f64)> = ranking
        .entries
        .iter()
        .take(top_n)
        .map(|(n, v)| (n.raw().to_string(), *v))
        .collect();
    PlotSpec {
        title: "Feature importance".into(),
        width: 720,
        height: 112 + 26 * bars.len().max(1) as u32,
        x_label: "mean(|SHAP value|) (log-odds)".into(),
        y_label: String::new(),
        payload: Payload::SummaryBar { bars },
    }
}

/// Force plot of one explanation. `row` holds the explained feature values.
pub fn force(e: &ShapExplanation<f64>, names: &[FeatureName], row: &[f64]) -> Result<PlotSpec, VizError> {
    check_lengths(e, names, row)?;
    let stripes = contributions(e, names, row)
        .into_iter()
        .filter(|c| c.phi != 0.0)
        .collect();
    Ok(PlotSpec {
        title: format!("Force plot, row {}", e.row_ref),
        width: 960,
        height: 220,
        x_label: "model output (log-odds)".into(),
        y_label: String::new(),
        payload: Payload::Force {
            base: e.base_value,
            fx: e.fx,
            stripes,
        },
    })
}

/// Waterfall from the base value to `fx`, showing the `max_features` largest
/// contributions and folding the rest into one residual bar.
pub fn waterfall(
    e: &ShapExplanation<f64>,
    names: &[FeatureName],
    row: &[f64],
    max_features: usize,
) -> Result<PlotSpec, VizError> {
    check_lengths(e, names, row)?;
    let mut steps = contributions(e, names, row);
    let others = (steps.len() > max_features).then(|| {
        let rest = steps.split_off(max_features);
        Others {
            count: rest.len(),
            phi: rest.iter().map(|c| c.phi).sum(),
        }
    });
    let bars = steps.len() + usize::from(others.is_some());
    Ok(PlotSpec {
        title: format!("Waterfall, row {}", e.row_ref),
        width: 820,
        height: 66 + 28 * bars.max(1) as u32 + 96,
        x_label: "model output (log-odds)".into(),
        y_label: String::new(),
        payload: Payload::Waterfall {
            base: e.base_value,
            fx: e.fx,
            steps,
            others,
        },
    })
}

/// Places each feature's points in horizontal bins and dodges them
/// vertically around the row center in a seeded order.
fn dodge(phis: &[f64], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let width = (hi - lo).max(f64::MIN_POSITIVE);
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); BEESWARM_BINS];
    for (i, &p) in phis.iter().enumerate() {
        let b = (((p - lo) / width) * BEESWARM_BINS as f64).floor();
        bins[(b.max(0.0) as usize).min(BEESWARM_BINS - 1)].push(i);
    }
    let half = bins.iter().map(Vec::len).max().unwrap_or(1).div_ceil(2).max(1);
    let step = BEESWARM_SPREAD / half as f64;
    let mut offsets = vec![0.0; phis.len()];
    for bin in &mut bins {
        bin.shuffle(rng);
        for (slot, &i) in bin.iter().enumerate() {
            let d = slot.div_ceil(2) as f64;
            let sign = if slot % 2 == 1 { 1.0 } else { -1.0 };
            offsets[i] = (sign * d * step).clamp(-BEESWARM_SPREAD, BEESWARM_SPREAD);
        }
    }
    offsets
}

/// One row per feature (most important first, at most `max_display`), one
/// point per explanation. `table` holds the explained rows in the same
/// order as `explanations`.
pub fn beeswarm(
    explanations: &[ShapExplanation<f64>],
    table: &EventTable<f64>,
    max_display: usize,
    seed: u64,
) -> Result<PlotSpec, VizError> {
    if explanations.is_empty() {
        return Err(VizError::EmptyInput);
    }
    if explanations.len() != table.n_rows() {
        return Err(VizError::DimensionMismatch {
            expected: table.n_rows(),
            found: explanations.len(),
        });
    }
    let ranking = mean_abs_shap(explanations, table.feature_names()).map_err(|_| {
        VizError::DimensionMismatch {
            expected: table.n_features(),
            found: explanations.iter().map(|e| e.phi.len()).find(|&l| l != table.n_features()).unwrap_or(0),
        }
    })?;
    let shown: Vec<(String, f64)> = ranking
        .entries
        .iter()
        .take(max_display.max(1))
        .map(|(n, v)| (n.raw().to_string(), *v))
        .collect();
    let all_phi = explanations.iter().flat_map(|e| e.phi.iter().copied());
    let (lo, hi) = all_phi.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(p), b.max(p)));
    let mut points = Vec::new();
    for (row, (name, _)) in shown.iter().enumerate() {
        let j = table.feature_index(name).expect("ranked feature exists");
        let phis: Vec<f64> = explanations.iter().map(|e| e.phi[j]).collect();
        let values: Vec<f64> = table.column(j).to_vec();
        let pct = percentiles(&values);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (j as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let offsets = dodge(&phis, lo, hi, &mut rng);
        points.extend((0..phis.len()).map(|i| SwarmPoint {
            feature: row,
            phi: phis[i],
            offset: offsets[i],
            percentile: pct[i],
        }));
    }
    Ok(PlotSpec {
        title: "SHAP values by feature".into(),
        width: 820,
        height: 110 + 34 * shown.len() as u32,
        x_label: "SHAP value (log-odds)".into(),
        y_label: String::new(),
        payload: Payload::Beeswarm {
            features: shown,
            points,
        },
    })
}

/// Scatter of `feature`'s values against its attributions, colored by the
/// partner's value percentile.
pub fn dependence(
    feature: &str,
    partner: &str,
    table: &EventTable<f64>,
    explanations: &[ShapExplanation<f64>],
) -> Result<PlotSpec, VizError> {
    let j = table
        .feature_index(feature)
        .ok_or_else(|| VizError::UnknownFeature(feature.to_string()))?;
    let k = table
        .feature_index(partner)
        .ok_or_else(|| VizError::UnknownFeature(partner.to_string()))?;
    if explanations.len() != table.n_rows() {
        return Err(VizError::DimensionMismatch {
            expected: table.n_rows(),
            found: explanations.len(),
        });
    }
    if let Some(e) = explanations.iter().find(|e| e.phi.len() != table.n_features()) {
        return Err(VizError::DimensionMismatch {
            expected: table.n_features(),
            found: e.phi.len(),
        });
    }
    let pct = percentiles(&table.column(k).to_vec());
    let points = explanations
        .iter()
        .enumerate()
        .map(|(i, e)| DependencePoint {
            row_ref: e.row_ref,
            x: table.row(i)[j],
            phi: e.phi[j],
            percentile: pct[i],
        })
        .collect();
    let fname = &table.feature_names()[j];
    Ok(PlotSpec {
        title: format!("Dependence of {}", fname.raw()),
        width: 760,
        height: 520,
        x_label: fname.describe(),
        y_label: format!("SHAP value for {} (log-odds)", fname.raw()),
        payload: Payload::Dependence {
            feature: fname.raw().to_string(),
            partner: table.feature_names()[k].raw().to_string(),
            points,
        },
    })
}

/// Annotated correlation grid.
pub fn heatmap(c: &CorrelationMatrix<f64>) -> PlotSpec {
    let n = c.len() as u32;
    let cell = if n <= 12 { 56 } else { (720 / n.max(1)).max(14) };
    PlotSpec {
        title: "Pearson correlation".into(),
        width: 240 + cell * n + 90,
        height: 90 + cell * n + 120,
        x_label: String::new(),
        y_label: String::new(),
        payload: Payload::Heatmap {
            labels: c.names.iter().map(|n| n.raw().to_string()).collect(),
            values: c.values.clone(),
            constant: c.constant.clone(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{EventClass, Provenance};
    use ndarray::Array2;

    fn names(n: usize) -> Vec<FeatureName> {
        (0..n).map(|j| FeatureName::column(&format!("f{j}"))).collect()
    }

    fn expl(phi: Vec<f64>, base: f64) -> ShapExplanation<f64> {
        let fx = base + phi.iter().sum::<f64>();
        ShapExplanation {
            phi,
            base_value: base,
            fx,
            row_ref: 0,
        }
    }

    fn table(rows: usize, f: usize) -> EventTable<f64> {
        EventTable::new(
            names(f),
            Array2::from_shape_fn((rows, f), |(i, j)| ((i * 7 + j * 3) % 11) as f64),
            vec![EventClass::Attack; rows],
            Provenance::synthetic(rows),
        )
        .unwrap()
    }

    #[test]
    fn summary_bar_counts_and_order() {
        let ranking = ImportanceRanking {
            entries: (0..12).map(|j| (FeatureName::column(&format!("f{j:02}")), 12.0 - j as f64)).collect(),
        };
        let spec = summary_bar(&ranking, 10);
        let Payload::SummaryBar { bars } = &spec.payload else { panic!() };
        assert_eq!(bars.len(), 10);
        assert!(bars.windows(2).all(|w| w[0].1 >= w[1].1));
        let one = ImportanceRanking {
            entries: vec![(FeatureName::column("a"), 1.0)],
        };
        let Payload::SummaryBar { bars } = summary_bar(&one, 10).payload else { panic!() };
        assert_eq!(bars.len(), 1);
    }

    #[test]
    fn summary_bar_ties_are_lexicographic() {
        let e = vec![expl(vec![1.0, 1.0, 1.0], 0.0)];
        let n = vec![FeatureName::column("c"), FeatureName::column("a"), FeatureName::column("b")];
        let ranking = mean_abs_shap(&e, &n).unwrap();
        let Payload::SummaryBar { bars } = summary_bar(&ranking, 3).payload else { panic!() };
        let labels: Vec<&str> = bars.iter().map(|b| b.0.as_str()).collect();
        assert_eq!(labels, vec!["a", "b", "c"]);
    }

    #[test]
    fn force_zero_and_single_stripe() {
        let e = expl(vec![0.0, 0.0], -1.0);
        let spec = force(&e, &names(2), &[1.0, 2.0]).unwrap();
        let Payload::Force { base, fx, stripes } = &spec.payload else { panic!() };
        assert_eq!(base, fx);
        assert!(stripes.is_empty());

        let e = expl(vec![0.0, 0.7], -1.0);
        let Payload::Force { base, fx, stripes } = force(&e, &names(2), &[1.0, 2.0]).unwrap().payload else {
            panic!()
        };
        assert_eq!(stripes.len(), 1);
        assert!((stripes[0].phi - (fx - base)).abs() < 1e-15);
    }

    #[test]
    fn waterfall_track_ends_at_fx() {
        let e = expl(vec![0.3, -0.2, 0.05, -0.6, 0.01], -2.5);
        let spec = waterfall(&e, &names(5), &[0.0; 5], 3).unwrap();
        let track = spec.waterfall_track().unwrap();
        assert!((track.last().unwrap().1 - e.fx).abs() < 1e-12);
        let Payload::Waterfall { steps, others, .. } = &spec.payload else { panic!() };
        assert_eq!(steps.len(), 3);
        assert_eq!(steps[0].label, "f3");
        assert_eq!(others.as_ref().unwrap().count, 2);
        let all = waterfall(&e, &names(5), &[0.0; 5], 5).unwrap();
        let Payload::Waterfall { others, .. } = &all.payload else { panic!() };
        assert!(others.is_none());
    }

    #[test]
    fn waterfall_matches_reference_net_change() {
        let e = expl(vec![-0.25, -0.1, -0.05], -2.5);
        assert!((e.fx + 2.9).abs() < 1e-12);
        let track = waterfall(&e, &names(3), &[0.0; 3], 10).unwrap().waterfall_track().unwrap();
        let net: f64 = track.iter().map(|(a, b)| b - a).sum();
        assert!((net + 0.4).abs() < 1e-12);
    }

    #[test]
    fn beeswarm_single_row_and_ordering() {
        let t = table(1, 3);
        let e = vec![expl(vec![0.1, -0.5, 0.2], 0.0)];
        let spec = beeswarm(&e, &t, 20, 1).unwrap();
        let Payload::Beeswarm { features, points } = &spec.payload else { panic!() };
        assert_eq!(points.len(), 3);
        assert_eq!(features.iter().map(|f| f.0.as_str()).collect::<Vec<_>>(), vec!["f1", "f2", "f0"]);
        assert!(points.iter().all(|p| p.offset == 0.0 && p.percentile == 0.5));
        assert!(matches!(beeswarm(&[], &t, 20, 1), Err(VizError::EmptyInput)));
    }

    #[test]
    fn beeswarm_is_seeded() {
        let t = table(40, 2);
        let e: Vec<_> = (0..40).map(|i| expl(vec![(i % 3) as f64 * 0.01, 0.2], 0.0)).collect();
        let a = beeswarm(&e, &t, 20, 9).unwrap();
        let b = beeswarm(&e, &t, 20, 9).unwrap();
        assert_eq!(a.to_svg(), b.to_svg());
        let Payload::Beeswarm { points, .. } = &a.payload else { panic!() };
        assert!(points.iter().all(|p| p.offset.abs() <= BEESWARM_SPREAD));
        assert!(points.iter().any(|p| p.offset != 0.0));
    }

    #[test]
    fn dependence_dummy_feature_is_flat() {
        let t = table(12, 2);
        let e: Vec<_> = (0..12).map(|i| expl(vec![0.0, i as f64], 0.0)).collect();
        let spec = dependence("f0", "f1", &t, &e).unwrap();
        let Payload::Dependence { points, .. } = &spec.payload else { panic!() };
        assert!(points.iter().all(|p| p.phi == 0.0));
        assert!(matches!(dependence("zz", "f1", &t, &e), Err(VizError::UnknownFeature(_))));
    }

    #[test]
    fn heatmap_annotations() {
        let c = CorrelationMatrix {
            names: vec![FeatureName::column("a"), FeatureName::column("b")],
            values: vec![vec![1.0, -0.08], vec![-0.08, 1.0]],
            constant: vec![false, false],
        };
        let svg = heatmap(&c).to_svg();
        assert_eq!(svg.matches(">-0.08<").count(), 2);
        assert_eq!(svg.matches(">1.00<").count(), 2);
        assert!(!svg.contains("(constant)"));
        let flat = CorrelationMatrix {
            constant: vec![false, true],
            ..c
        };
        assert_eq!(heatmap(&flat).to_svg().matches(">b (constant)<").count(), 1);
    }

    #[test]
    fn percentile_ranks() {
        assert_eq!(percentiles(&[3.0, 1.0, 2.0]), vec![1.0, 0.0, 0.5]);
        assert_eq!(percentiles(&[2.0, 2.0]), vec![0.5, 0.5]);
        assert_eq!(percentiles(&[1.0, 1.0, 4.0]), vec![0.25, 0.25, 1.0]);
    }

    #[test]
    fn file_stems() {
        assert_eq!(
            file_stem("attack_natural", PlotKind::Dependence, Some("R1-PM5:I")),
            "attack_natural_dependence_R1-PM5_I"
        );
        assert_eq!(file_stem("x", PlotKind::Heatmap, None), "x_heatmap");
    }
}
