use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Cell, ColumnKind, ColumnSchema, Dataset};
use crate::{Error, Result};

/// Numeric columns with more distinct integer values than this are treated as
/// continuous during inference.
const MAX_DISCRETE_LEVELS: usize = 64;

#[derive(Debug, Clone)]
pub enum SchemaSpec {
    /// Infer column kinds from the data. The label is the named column, or
    /// the last column when no name is given.
    Infer {
        label: Option<String>,
    },
    Fixed(Vec<ColumnSchema>),
}

impl Default for SchemaSpec {
    fn default() -> Self {
        SchemaSpec::Infer { label: None }
    }
}

pub fn load_csv(path: impl AsRef<Path>, spec: &SchemaSpec) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, spec, path.display().to_string())
}

fn is_missing(raw: &str) -> bool {
    raw.is_empty() || raw == "?"
}

fn parse_number(raw: &str) -> Option<f64> {
    raw.parse::<f64>().ok().filter(|v| v.is_finite())
}

pub fn read_csv<R: Read>(reader: R, spec: &SchemaSpec, provenance: impl Into<String>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Parse {
            row: 0,
            message: "missing header row".into(),
        });
    }

    let mut raw_rows: Vec<Vec<String>> = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row: i + 1,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        raw_rows.push(record.iter().map(|c| c.trim().to_string()).collect());
    }

    let schema = match spec {
        SchemaSpec::Infer { label } => infer_schema(&header, &raw_rows, label.as_deref())?,
        SchemaSpec::Fixed(fixed) => complete_schema(&header, &raw_rows, fixed)?,
    };

    let rows = raw_rows
        .iter()
        .enumerate()
        .map(|(i, raw)| {
            raw.iter()
                .zip(&schema)
                .map(|(cell, col)| parse_cell(cell, col, i + 1))
                .collect::<Result<Vec<Cell>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    Dataset::new(schema, rows, provenance)
}

fn parse_cell(raw: &str, col: &ColumnSchema, row: usize) -> Result<Cell> {
    if is_missing(raw) {
        return Ok(None);
    }
    match col.kind {
        ColumnKind::Categorical => col
            .categories
            .binary_search_by(|c| c.as_str().cmp(raw))
            .map(|code| Some(code as f64))
            .map_err(|_| Error::Schema(format!("unknown category `{raw}` in column `{}` (row {row})", col.name))),
        _ => parse_number(raw).map(Some).ok_or_else(|| Error::Parse {
            row,
            message: format!("`{raw}` is not a number (column `{}`)", col.name),
        }),
    }
}

fn column_values(rows: &[Vec<String>], j: usize) -> impl Iterator<Item = &str> {
    rows.iter().map(move |r| r[j].as_str()).filter(|c| !is_missing(c))
}

fn sorted_categories(rows: &[Vec<String>], j: usize) -> Vec<String> {
    column_values(rows, j)
        .map(str::to_string)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn infer_kind(rows: &[Vec<String>], j: usize) -> ColumnKind {
    let mut numbers = Vec::new();
    for raw in column_values(rows, j) {
        match parse_number(raw) {
            Some(v) => numbers.push(v),
            None => return ColumnKind::Categorical,
        }
    }
    if numbers.is_empty() {
        return ColumnKind::Continuous;
    }
    if numbers.iter().all(|v| v.fract() == 0.0) {
        let distinct: BTreeSet<u64> = numbers.iter().map(|v| v.to_bits()).collect();
        if distinct.len() <= MAX_DISCRETE_LEVELS {
            return ColumnKind::Discrete;
        }
    }
    ColumnKind::Continuous
}

fn infer_schema(header: &[String], rows: &[Vec<String>], label: Option<&str>) -> Result<Vec<ColumnSchema>> {
    let label_idx = match label {
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("label column `{name}` not found")))?,
        None => header.len() - 1,
    };
    Ok(header
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let kind = infer_kind(rows, j);
            let categories = if kind == ColumnKind::Categorical {
                sorted_categories(rows, j)
            } else {
                Vec::new()
            };
            ColumnSchema {
                name: name.clone(),
                kind,
                categories,
                is_label: j == label_idx,
            }
        })
        .collect())
}

/// Checks the header against a fixed schema and fills in category lists the
/// schema leaves open.
fn complete_schema(header: &[String], rows: &[Vec<String>], fixed: &[ColumnSchema]) -> Result<Vec<ColumnSchema>> {
    let names: Vec<&str> = fixed.iter().map(|c| c.name.as_str()).collect();
    if header.iter().map(String::as_str).ne(names.iter().copied()) {
        return Err(Error::Schema(format!(
            "header {header:?} does not match schema columns {names:?}"
        )));
    }
    Ok(fixed
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let mut c = c.clone();
            if c.kind == ColumnKind::Categorical && c.categories.is_empty() {
                c.categories = sorted_categories(rows, j);
            }
            c
        })
        .collect())
}

pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(d, file)
}

pub fn write_csv_to<W: Write>(d: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(d.schema().iter().map(|c| c.name.as_str()))?;
    for row in d.rows() {
        w.write_record(row.iter().enumerate().map(|(j, &c)| d.format_cell(j, c)))?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

pub fn parse_schema(text: &str) -> Result<Vec<ColumnSchema>> {
    let schema: Vec<ColumnSchema> = serde_json::from_str(text)?;
    super::validate_schema(&schema)?;
    Ok(schema)
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<Vec<ColumnSchema>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_schema(&text)
}

pub fn write_schema(schema: &[ColumnSchema], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(schema)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
