//! Binary table cache.
//!
//! Layout: the 5 bytes `GSHD1`, a little-endian `u64` header length, a JSON
//! header `{names, R, F, label_codes, source, rows}`, `R * F` little-endian
//! `f64` values in row-major order, then one label byte per row. Label bytes
//! are [`EventClass::index`] values; `label_codes` records that mapping.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{DatasetError, EventClass, EventTable, FeatureName, Provenance};
use crate::Scalar;

pub const CACHE_MAGIC: &[u8; 5] = b"GSHD1";

#[derive(Serialize, Deserialize)]
struct Header {
    names: Vec<String>,
    #[serde(rename = "R")]
    rows: usize,
    #[serde(rename = "F")]
    features: usize,
    label_codes: BTreeMap<String, u8>,
    source: Option<PathBuf>,
    rows_retained: Vec<usize>,
}

pub fn write_cache<T: Scalar>(table: &EventTable<T>, path: &Path) -> Result<(), DatasetError> {
    let header = Header {
        names: table.feature_names().iter().map(|n| n.raw().to_string()).collect(),
        rows: table.n_rows(),
        features: table.n_features(),
        label_codes: EventClass::ALL
            .iter()
            .map(|c| (c.canonical_name().to_string(), c.index()))
            .collect(),
        source: table.provenance().source.clone(),
        rows_retained: table.provenance().rows.clone(),
    };
    let header = serde_json::to_vec(&header)?;
    let file = std::fs::File::create(path).map_err(|e| DatasetError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| DatasetError::io(path, e);
    w.write_all(CACHE_MAGIC).map_err(io)?;
    w.write_all(&(header.len() as u64).to_le_bytes()).map_err(io)?;
    w.write_all(&header).map_err(io)?;
    for v in table.values().iter() {
        w.write_all(&v.as_f64().to_le_bytes()).map_err(io)?;
    }
    let labels: Vec<u8> = table.labels().iter().map(|l| l.index()).collect();
    w.write_all(&labels).map_err(io)?;
    w.flush().map_err(io)
}

pub fn read_cache<T: Scalar>(path: &Path) -> Result<EventTable<T>, DatasetError> {
    let file = std::fs::File::open(path).map_err(|e| DatasetError::io(path, e))?;
    let mut r = BufReader::new(file);
    let io = |e| DatasetError::io(path, e);

    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(io)?;
    if &magic != CACHE_MAGIC {
        return Err(DatasetError::BadCache("wrong magic".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len).map_err(io)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut header = vec![0u8; len];
    r.read_exact(&mut header).map_err(io)?;
    let header: Header = serde_json::from_slice(&header)?;
    if header.names.len() != header.features || header.rows_retained.len() != header.rows {
        return Err(DatasetError::BadCache("inconsistent header".into()));
    }

    let mut buf = vec![0u8; header.rows * header.features * 8];
    r.read_exact(&mut buf).map_err(io)?;
    let values: Vec<T> = buf
        .chunks_exact(8)
        .map(|c| T::from_f64(f64::from_le_bytes(c.try_into().expect("8 bytes"))).unwrap_or_else(T::nan))
        .collect();
    let mut codes = vec![0u8; header.rows];
    r.read_exact(&mut codes).map_err(io)?;
    let mut by_code = BTreeMap::new();
    for (name, code) in &header.label_codes {
        let class: EventClass = name.parse().map_err(DatasetError::BadCache)?;
        by_code.insert(*code, class);
    }
    let labels = codes
        .iter()
        .map(|c| {
            by_code
                .get(c)
                .copied()
                .ok_or_else(|| DatasetError::BadCache(format!("label byte {c}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut trailing = Vec::new();
    r.read_to_end(&mut trailing).map_err(io)?;
    if !trailing.is_empty() {
        return Err(DatasetError::BadCache("trailing bytes".into()));
    }

    let values = Array2::from_shape_vec((header.rows, header.features), values)
        .map_err(|e| DatasetError::BadCache(e.to_string()))?;
    EventTable::new(
        header.names.iter().map(|n| FeatureName::column(n)).collect(),
        values,
        labels,
        Provenance {
            source: header.source,
            rows: header.rows_retained,
        },
    )
}
