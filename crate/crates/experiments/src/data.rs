//! CSV ingestion and output of univariate series.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {msg}")]
    Read { path: String, msg: String },
    #[error("{path}: no column named '{name}'")]
    MissingColumn { path: String, name: String },
    #[error("{path}: column index {index} out of range ({width} columns)")]
    ColumnIndex { path: String, index: usize, width: usize },
    #[error("{path}: {bad} of {rows} rows unparseable (limit {limit:.0}%)")]
    TooManyBadRows { path: String, bad: usize, rows: usize, limit: f64 },
    #[error("{path}: no usable observations")]
    Empty { path: String },
    #[error("{path}: non-positive price {value} at row {row}")]
    NonPositivePrice { path: String, value: f64, row: usize },
    #[error("write {path}: {msg}")]
    Write { path: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Column {
    Name(String),
    Index(usize),
}

impl Default for Column {
    fn default() -> Self {
        Column::Index(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    #[default]
    Returns,
    Prices,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    pub column: Column,
    pub kind: SeriesKind,
    /// For prices: log-returns when true, simple returns otherwise.
    pub log_returns: bool,
    /// Keep only the last `tail` observations after conversion.
    pub tail: Option<usize>,
    /// Largest tolerated share of blank/unparseable rows.
    pub max_bad_fraction: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self { column: Column::default(), kind: SeriesKind::Returns, log_returns: true, tail: None, max_bad_fraction: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestedSeries {
    pub values: Vec<f64>,
    /// Blank, NaN or unparseable rows dropped.
    pub dropped: usize,
}

pub fn ingest_csv(path: &Path, opts: &IngestOptions) -> Result<IngestedSeries, DataError> {
    let p = path.display().to_string();
    let read_err = |e: csv::Error| DataError::Read { path: p.clone(), msg: e.to_string() };
    let mut reader = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_path(path).map_err(read_err)?;
    let headers = reader.headers().map_err(read_err)?.clone();
    let idx = match &opts.column {
        Column::Name(name) => headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| DataError::MissingColumn { path: p.clone(), name: name.clone() })?,
        Column::Index(i) => {
            if *i >= headers.len() {
                return Err(DataError::ColumnIndex { path: p.clone(), index: *i, width: headers.len() });
            }
            *i
        }
    };
    let mut raw = Vec::new();
    let (mut rows, mut bad) = (0usize, 0usize);
    for rec in reader.records() {
        let rec = rec.map_err(read_err)?;
        rows += 1;
        match rec.get(idx).map(str::trim).and_then(|s| s.parse::<f64>().ok()).filter(|v| v.is_finite()) {
            Some(v) => raw.push(v),
            None => bad += 1,
        }
    }
    if rows > 0 && bad as f64 > opts.max_bad_fraction * rows as f64 && bad > 0 {
        return Err(DataError::TooManyBadRows { path: p, bad, rows, limit: 100.0 * opts.max_bad_fraction });
    }
    let mut values = match opts.kind {
        SeriesKind::Returns => raw,
        SeriesKind::Prices => {
            if let Some((row, &value)) = raw.iter().enumerate().find(|(_, &v)| v <= 0.0) {
                return Err(DataError::NonPositivePrice { path: p, value, row });
            }
            raw.windows(2)
                .map(|w| if opts.log_returns { (w[1] / w[0]).ln() } else { w[1] / w[0] - 1.0 })
                .collect()
        }
    };
    if let Some(t) = opts.tail {
        if values.len() > t {
            values.drain(..values.len() - t);
        }
    }
    if values.is_empty() {
        return Err(DataError::Empty { path: p });
    }
    Ok(IngestedSeries { values, dropped: bad })
}

/// One-column CSV with a header; values use the shortest round-trip form.
pub fn write_series_csv(path: &Path, header: &str, values: &[f64]) -> Result<(), DataError> {
    let p = path.display().to_string();
    let werr = |e: csv::Error| DataError::Write { path: p.clone(), msg: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(werr)?;
    w.write_record([header]).map_err(werr)?;
    for v in values {
        w.write_record([v.to_string()]).map_err(werr)?;
    }
    w.flush().map_err(|e| DataError::Write { path: p.clone(), msg: e.to_string() })
}

/// Several named columns of equal length.
pub fn write_columns_csv(path: &Path, columns: &[(&str, &[f64])]) -> Result<(), DataError> {
    let p = path.display().to_string();
    let werr = |e: csv::Error| DataError::Write { path: p.clone(), msg: e.to_string() };
    let mut w = csv::Writer::from_path(path).map_err(werr)?;
    w.write_record(columns.iter().map(|c| c.0)).map_err(werr)?;
    let len = columns.iter().map(|c| c.1.len()).min().unwrap_or(0);
    for i in 0..len {
        w.write_record(columns.iter().map(|c| c.1[i].to_string())).map_err(werr)?;
    }
    w.flush().map_err(|e| DataError::Write { path: p.clone(), msg: e.to_string() })
}
