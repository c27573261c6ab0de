//! Event table ingestion: PMU column names, event classes, CSV loading,
//! label encoding, pairwise sub-datasets and the binary table cache.

mod cache;
mod load;
mod names;
pub mod synthetic;
mod table;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cache::{read_cache, write_cache, CACHE_MAGIC};
pub use load::{
    clean_rows, load_events, LoadOptions, LoadOutcome, ScenarioMapping, SchemaManifest,
};
pub use names::{parse_feature_name, FeatureName, PmuSignal, Quantity, SignalKind};
pub use table::{EventTable, Provenance};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("malformed feature name {name:?}: {reason}")]
    MalformedName { name: String, reason: &'static str },
    #[error("label column {0:?} not found in header")]
    MissingLabelColumn(String),
    #[error("column {0:?} listed in the schema manifest is missing from the input")]
    MissingColumn(String),
    #[error("no rows left after removing non-finite values")]
    EmptyAfterCleaning,
    #[error("unrecognised event label {value:?} on data row {row}")]
    UnknownLabel { row: usize, value: String },
    #[error("class {0} has no rows")]
    ClassAbsent(EventClass),
    #[error("a pair needs two distinct classes, got {0} twice")]
    SameClass(EventClass),
    #[error("table is empty")]
    EmptyTable,
    #[error("duplicate feature name {0:?}")]
    DuplicateFeature(String),
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("bad cache file: {0}")]
    BadCache(String),
    #[error("bad mapping file line {line}: {reason}")]
    BadMapping { line: usize, reason: String },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl DatasetError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DatasetError::Io {
            path: path.into(),
            source,
        }
    }
}

/// The three event classes. Variant order is the lexicographic order of the
/// canonical names, which fixes label codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventClass {
    #[serde(rename = "Attack")]
    Attack,
    #[serde(rename = "Natural")]
    Natural,
    #[serde(rename = "NoEvents")]
    NoEvent,
}

impl EventClass {
    pub const ALL: [EventClass; 3] = [EventClass::Attack, EventClass::Natural, EventClass::NoEvent];

    pub fn canonical_name(self) -> &'static str {
        match self {
            EventClass::Attack => "Attack",
            EventClass::Natural => "Natural",
            EventClass::NoEvent => "NoEvents",
        }
    }

    /// Position in [`EventClass::ALL`]; the per-row byte in the table cache.
    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Option<EventClass> {
        EventClass::ALL.get(i as usize).copied()
    }
}

impl fmt::Display for EventClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical_name())
    }
}

impl FromStr for EventClass {
    type Err = String;

    /// Accepts the canonical names plus common spellings found in marker
    /// columns ("No Events", "no-event", "attack events", ...).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "attack" | "attacks" | "attackevent" | "attackevents" => Ok(EventClass::Attack),
            "natural" | "naturalevent" | "naturalevents" => Ok(EventClass::Natural),
            "noevent" | "noevents" | "normal" => Ok(EventClass::NoEvent),
            _ => Err(format!("unrecognised event class {s:?}")),
        }
    }
}

/// Bijection between the classes present in a table and codes `0..K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEncoding {
    classes: Vec<EventClass>,
}

impl LabelEncoding {
    /// Builds the encoding for a class set; order is lexicographic no matter
    /// how the input is ordered.
    pub fn from_classes(classes: impl IntoIterator<Item = EventClass>) -> Self {
        let mut classes: Vec<EventClass> = classes.into_iter().collect();
        classes.sort();
        classes.dedup();
        LabelEncoding { classes }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn classes(&self) -> &[EventClass] {
        &self.classes
    }

    pub fn code(&self, class: EventClass) -> Option<usize> {
        self.classes.binary_search(&class).ok()
    }

    pub fn class(&self, code: usize) -> Option<EventClass> {
        self.classes.get(code).copied()
    }

    pub fn encode(&self, labels: &[EventClass]) -> Option<Vec<usize>> {
        labels.iter().map(|&c| self.code(c)).collect()
    }
}

/// Encodes the table's labels with codes assigned in lexicographic order of
/// the classes actually present.
pub fn encode_labels<T: crate::Scalar>(table: &EventTable<T>) -> Result<(Vec<usize>, LabelEncoding), DatasetError> {
    if table.n_rows() == 0 {
        return Err(DatasetError::EmptyTable);
    }
    let enc = LabelEncoding::from_classes(table.labels().iter().copied());
    let codes = enc
        .encode(table.labels())
        .expect("encoding built from the same labels");
    Ok((codes, enc))
}

/// Keeps rows labelled `a` or `b`, preserving their relative order.
pub fn extract_pair<T: crate::Scalar>(
    table: &EventTable<T>,
    a: EventClass,
    b: EventClass,
) -> Result<EventTable<T>, DatasetError> {
    if a == b {
        return Err(DatasetError::SameClass(a));
    }
    let counts = table.class_counts();
    for class in [a, b] {
        if counts[class.index() as usize] == 0 {
            return Err(DatasetError::ClassAbsent(class));
        }
    }
    let rows: Vec<usize> = table
        .labels()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == a || l == b)
        .map(|(i, _)| i)
        .collect();
    Ok(table.select_rows(&rows))
}
