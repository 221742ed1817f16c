//! Alternative datasets in CSV or JSON.
//!
//! Every dataset has a mandatory `id` column and an optional `name`
//! column. Columns named in the [`DatasetSchema`] become typed measurements;
//! other CSV columns are kept as text metadata. JSON objects keep undeclared
//! numbers and booleans as measurements and undeclared strings as metadata.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde_json::Value;
use thiserror::Error;

use crate::model::{Alternative, QualityModel, RawValue, ValueType};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    Json,
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!(
                "unknown dataset format `{other}` (expected csv or json)"
            )),
        }
    }
}

impl fmt::Display for DatasetFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Csv => "csv",
            Self::Json => "json",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColumnKind {
    Number,
    Flag,
    Category,
}

/// Expected measurement kind per column (metric source id).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DatasetSchema {
    columns: BTreeMap<String, ColumnKind>,
}

impl DatasetSchema {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_column(mut self, name: impl Into<String>, kind: ColumnKind) -> Self {
        self.columns.insert(name.into(), kind);
        self
    }

    /// One column per bound metric source, typed by the bound leaf's value type.
    pub fn from_model(model: &QualityModel) -> Self {
        let mut schema = Self::new();
        for binding in &model.metric_bindings {
            let kind = model
                .attribute(&binding.attribute)
                .and_then(|a| a.value_type.as_deref())
                .and_then(|name| model.value_types.get(name))
                .map(|vt| match vt {
                    ValueType::Numeric | ValueType::Ranged { .. } => ColumnKind::Number,
                    ValueType::Boolean { .. } => ColumnKind::Flag,
                    ValueType::Categorical { .. } => ColumnKind::Category,
                });
            if let Some(kind) = kind {
                schema.columns.insert(binding.source.clone(), kind);
            }
        }
        schema
    }

    pub fn kind(&self, column: &str) -> Option<ColumnKind> {
        self.columns.get(column).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("missing `id` column")]
    MissingIdColumn,
    #[error("row {row}: missing id")]
    MissingId { row: usize },
    #[error("row {row}: duplicate id `{id}`")]
    DuplicateId { row: usize, id: String },
    #[error("row {row}, column `{column}`: {message}")]
    MalformedCell {
        row: usize,
        column: String,
        message: String,
    },
    #[error("malformed csv: {0}")]
    Csv(String),
    #[error("malformed json: {0}")]
    Json(String),
}

/// Parses a number as printed in tables: optional sign, optional
/// thousands separators between 3-digit groups, optional fraction/exponent.
pub fn parse_number(text: &str) -> Option<f64> {
    let s = text.trim();
    if s.is_empty() {
        return None;
    }
    let cleaned = if s.contains(',') {
        let body = s.strip_prefix(['-', '+']).unwrap_or(s);
        let int_end = body.find(['.', 'e', 'E']).unwrap_or(body.len());
        let mut groups = body[..int_end].split(',');
        let first = groups.next()?;
        let ok_first = (1..=3).contains(&first.len()) && first.bytes().all(|b| b.is_ascii_digit());
        let ok_rest = groups.all(|g| g.len() == 3 && g.bytes().all(|b| b.is_ascii_digit()));
        if !(ok_first && ok_rest) || body[int_end..].contains(',') {
            return None;
        }
        s.replace(',', "")
    } else {
        s.to_string()
    };
    // f64::from_str also accepts "inf" and "nan"
    if !cleaned
        .bytes()
        .all(|b| b.is_ascii_digit() || matches!(b, b'.' | b'-' | b'+' | b'e' | b'E'))
    {
        return None;
    }
    cleaned.parse::<f64>().ok().filter(|n| n.is_finite())
}

fn parse_flag(text: &str) -> Option<bool> {
    match text.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" => Some(true),
        "false" | "no" => Some(false),
        _ => None,
    }
}

fn typed_cell(
    text: &str,
    kind: ColumnKind,
    row: usize,
    column: &str,
) -> Result<RawValue, DatasetError> {
    let malformed = |message: String| DatasetError::MalformedCell {
        row,
        column: column.to_string(),
        message,
    };
    match kind {
        ColumnKind::Number => parse_number(text)
            .map(RawValue::Number)
            .ok_or_else(|| malformed(format!("malformed number `{text}`"))),
        ColumnKind::Flag => parse_flag(text)
            .map(RawValue::Flag)
            .ok_or_else(|| malformed(format!("malformed boolean `{text}`"))),
        ColumnKind::Category => Ok(RawValue::Category(text.to_string())),
    }
}

pub fn parse_dataset(
    text: &str,
    format: DatasetFormat,
    schema: &DatasetSchema,
) -> Result<Vec<Alternative>, DatasetError> {
    let alternatives = match format {
        DatasetFormat::Csv => parse_csv(text, schema)?,
        DatasetFormat::Json => parse_json(text, schema)?,
    };
    let mut seen = BTreeSet::new();
    for (i, alt) in alternatives.iter().enumerate() {
        if !seen.insert(alt.id.as_str()) {
            return Err(DatasetError::DuplicateId {
                row: i + 1,
                id: alt.id.clone(),
            });
        }
    }
    Ok(alternatives)
}

fn parse_csv(text: &str, schema: &DatasetSchema) -> Result<Vec<Alternative>, DatasetError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| DatasetError::Csv(e.to_string()))?
        .clone();
    let id_col = headers
        .iter()
        .position(|h| h == "id")
        .ok_or(DatasetError::MissingIdColumn)?;
    let name_col = headers.iter().position(|h| h == "name");

    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DatasetError::Csv(e.to_string()))?;
        let id = record.get(id_col).unwrap_or_default();
        if id.is_empty() {
            return Err(DatasetError::MissingId { row });
        }
        let mut alt = Alternative::new(id);
        if let Some(name) = name_col
            .and_then(|c| record.get(c))
            .filter(|n| !n.is_empty())
        {
            alt.display_name = name.to_string();
        }
        for (col, header) in headers.iter().enumerate() {
            if col == id_col || Some(col) == name_col {
                continue;
            }
            let cell = record.get(col).unwrap_or_default();
            if cell.is_empty() {
                continue;
            }
            match schema.kind(header) {
                Some(kind) => {
                    alt.measurements
                        .insert(header.to_string(), typed_cell(cell, kind, row, header)?);
                }
                None => {
                    alt.metadata.insert(header.to_string(), cell.to_string());
                }
            }
        }
        out.push(alt);
    }
    Ok(out)
}

fn parse_json(text: &str, schema: &DatasetSchema) -> Result<Vec<Alternative>, DatasetError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let value: Value = serde_json::from_str(text).map_err(|e| DatasetError::Json(e.to_string()))?;
    let rows = value
        .as_array()
        .ok_or_else(|| DatasetError::Json("expected an array of objects".into()))?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, row_value) in rows.iter().enumerate() {
        let row = i + 1;
        let obj = row_value
            .as_object()
            .ok_or_else(|| DatasetError::Json(format!("row {row} is not an object")))?;
        let id = match obj.get("id") {
            None => return Err(DatasetError::MissingIdColumn),
            Some(Value::String(s)) if !s.is_empty() => s.clone(),
            Some(_) => return Err(DatasetError::MissingId { row }),
        };
        let mut alt = Alternative::new(id);
        for (key, cell) in obj {
            let malformed = |message: &str| DatasetError::MalformedCell {
                row,
                column: key.clone(),
                message: format!("{message}, got {cell}"),
            };
            match key.as_str() {
                "id" => {}
                "name" => match cell {
                    Value::String(s) => alt.display_name = s.clone(),
                    _ => return Err(malformed("expected a string")),
                },
                "metadata" => {
                    let entries = cell
                        .as_object()
                        .ok_or_else(|| malformed("expected an object"))?;
                    for (k, v) in entries {
                        let text = match v {
                            Value::String(s) => s.clone(),
                            other => other.to_string(),
                        };
                        alt.metadata.insert(k.clone(), text);
                    }
                }
                _ if cell.is_null() => {}
                _ => {
                    let value = match (schema.kind(key), cell) {
                        (Some(ColumnKind::Number) | None, Value::Number(n)) => RawValue::Number(
                            n.as_f64().ok_or_else(|| malformed("number out of range"))?,
                        ),
                        (Some(ColumnKind::Flag) | None, Value::Bool(b)) => RawValue::Flag(*b),
                        (Some(kind), Value::String(s)) => typed_cell(s, kind, row, key)?,
                        (None, Value::String(s)) => {
                            alt.metadata.insert(key.clone(), s.clone());
                            continue;
                        }
                        (Some(ColumnKind::Number), _) => {
                            return Err(malformed("expected a number"))
                        }
                        (Some(ColumnKind::Flag), _) => return Err(malformed("expected a boolean")),
                        (Some(ColumnKind::Category), _) => {
                            return Err(malformed("expected a string"))
                        }
                        (None, _) => return Err(malformed("unsupported value")),
                    };
                    alt.measurements.insert(key.clone(), value);
                }
            }
        }
        out.push(alt);
    }
    Ok(out)
}
