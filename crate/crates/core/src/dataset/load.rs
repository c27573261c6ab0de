use std::collections::HashMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{DatasetError, EventClass, EventTable, FeatureName, Provenance};
use crate::Scalar;

/// Ordered list of feature columns to keep, one name per line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaManifest {
    pub columns: Vec<String>,
}

impl SchemaManifest {
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse(text: &str) -> SchemaManifest {
        let columns = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect();
        SchemaManifest { columns }
    }

    pub fn read(path: &Path) -> Result<SchemaManifest, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
        Ok(SchemaManifest::parse(&text))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.columns {
            out.push_str(c);
            out.push('\n');
        }
        out
    }
}

/// Maps numeric scenario markers to event classes.
///
/// One rule per line, `<scenario> = <class>` or `<lo>-<hi> = <class>`;
/// `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScenarioMapping {
    rules: Vec<(i64, i64, EventClass)>,
}

impl ScenarioMapping {
    pub fn parse(text: &str) -> Result<ScenarioMapping, DatasetError> {
        let mut rules = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |reason: &str| DatasetError::BadMapping {
                line: i + 1,
                reason: reason.to_string(),
            };
            let (lhs, rhs) = line.split_once('=').ok_or_else(|| bad("expected '='"))?;
            let class: EventClass = rhs.trim().parse().map_err(|e: String| bad(&e))?;
            let lhs = lhs.trim();
            let (lo, hi) = match lhs.split_once('-') {
                Some((a, b)) => (a.trim(), b.trim()),
                None => (lhs, lhs),
            };
            let lo: i64 = lo.parse().map_err(|_| bad("scenario must be an integer"))?;
            let hi: i64 = hi.parse().map_err(|_| bad("scenario must be an integer"))?;
            if lo > hi {
                return Err(bad("empty range"));
            }
            rules.push((lo, hi, class));
        }
        Ok(ScenarioMapping { rules })
    }

    pub fn read(path: &Path) -> Result<ScenarioMapping, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
        ScenarioMapping::parse(&text)
    }

    pub fn class_of(&self, scenario: i64) -> Option<EventClass> {
        self.rules
            .iter()
            .find(|(lo, hi, _)| (*lo..=*hi).contains(&scenario))
            .map(|r| r.2)
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub label_column: String,
    pub manifest: Option<SchemaManifest>,
    pub scenario_mapping: Option<ScenarioMapping>,
    /// Reject feature columns that do not follow the PMU naming grammar.
    pub strict_names: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            label_column: "marker".to_string(),
            manifest: None,
            scenario_mapping: None,
            strict_names: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadOutcome {
    pub table: EventTable<f64>,
    pub rows_in: usize,
    /// Zero-based data-row indices removed for holding a non-finite or
    /// unparseable cell.
    pub dropped: Vec<usize>,
    /// Feature columns kept verbatim because they are not PMU names.
    pub unstructured_columns: Vec<String>,
}

/// Indices of rows that are entirely finite, and of those that are not.
pub fn clean_rows<T: Scalar>(values: &Array2<T>) -> (Vec<usize>, Vec<usize>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (i, row) in values.rows().into_iter().enumerate() {
        if row.iter().all(|v| v.is_finite()) {
            kept.push(i);
        } else {
            dropped.push(i);
        }
    }
    (kept, dropped)
}

/// Reads a header-bearing, comma-separated event file.
pub fn load_events(path: &Path, options: &LoadOptions) -> Result<LoadOutcome, DatasetError> {
    let file = File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();

    let label_idx = header
        .iter()
        .position(|h| h == &options.label_column)
        .ok_or_else(|| DatasetError::MissingLabelColumn(options.label_column.clone()))?;

    let feature_idx: Vec<usize> = match &options.manifest {
        Some(manifest) => {
            let by_name: HashMap<&str, usize> = header
                .iter()
                .enumerate()
                .map(|(i, h)| (h.as_str(), i))
                .collect();
            manifest
                .columns
                .iter()
                .map(|c| {
                    by_name
                        .get(c.as_str())
                        .copied()
                        .filter(|&i| i != label_idx)
                        .ok_or_else(|| DatasetError::MissingColumn(c.clone()))
                })
                .collect::<Result<_, _>>()?
        }
        None => (0..header.len()).filter(|&i| i != label_idx).collect(),
    };

    let mut feature_names = Vec::with_capacity(feature_idx.len());
    let mut unstructured = Vec::new();
    for &i in &feature_idx {
        let name = if options.strict_names {
            super::parse_feature_name(&header[i])?
        } else {
            FeatureName::column(&header[i])
        };
        if name.signal().is_none() {
            unstructured.push(name.raw().to_string());
        }
        feature_names.push(name);
    }

    let width = feature_idx.len();
    let mut values: Vec<f64> = Vec::new();
    let mut labels = Vec::new();
    let mut kept_rows = Vec::new();
    let mut dropped = Vec::new();
    let mut rows_in = 0usize;
    let mut row_buf = Vec::with_capacity(width);
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        rows_in += 1;
        let raw_label = record.get(label_idx).unwrap_or("");
        let label = parse_label(raw_label, options.scenario_mapping.as_ref()).ok_or_else(|| {
            DatasetError::UnknownLabel {
                row,
                value: raw_label.to_string(),
            }
        })?;
        row_buf.clear();
        let mut finite = true;
        for &i in &feature_idx {
            match record.get(i).and_then(|c| c.parse::<f64>().ok()) {
                Some(v) if v.is_finite() => row_buf.push(v),
                _ => {
                    finite = false;
                    break;
                }
            }
        }
        if finite {
            values.extend_from_slice(&row_buf);
            labels.push(label);
            kept_rows.push(row);
        } else {
            dropped.push(row);
        }
    }

    if labels.is_empty() {
        return Err(DatasetError::EmptyAfterCleaning);
    }
    let values = Array2::from_shape_vec((labels.len(), width), values)
        .map_err(|e| DatasetError::Shape(e.to_string()))?;
    let table = EventTable::new(
        feature_names,
        values,
        labels,
        Provenance {
            source: Some(PathBuf::from(path)),
            rows: kept_rows,
        },
    )?;
    Ok(LoadOutcome {
        table,
        rows_in,
        dropped,
        unstructured_columns: unstructured,
    })
}

fn parse_label(raw: &str, mapping: Option<&ScenarioMapping>) -> Option<EventClass> {
    if let Some(mapping) = mapping {
        let scenario = raw
            .parse::<i64>()
            .ok()
            .or_else(|| raw.parse::<f64>().ok().filter(|f| f.fract() == 0.0).map(|f| f as i64));
        if let Some(s) = scenario {
            return mapping.class_of(s);
        }
    }
    raw.parse().ok()
}
