//! Schema-typed tabular data with first-class missing cells.
//!
//! Cells are `Option<f64>`. Categorical cells hold the index of their label in
//! the column's lexicographically sorted category list, so coding never
//! depends on row order.

mod csv_io;
mod sampling;
mod stats;
mod synth;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use csv_io::{load_csv, load_schema, parse_schema, read_csv, write_csv, write_csv_to, write_schema, SchemaSpec};
pub use sampling::{sample_rows, split};
pub use stats::{column_stats, ColumnStats};
pub use synth::{draw_synthetic, make_synthetic, SyntheticSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColumnKind {
    #[serde(rename = "numeric-continuous")]
    Continuous,
    #[serde(rename = "numeric-discrete")]
    Discrete,
    #[serde(rename = "categorical")]
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    #[serde(default)]
    pub is_label: bool,
}

impl ColumnSchema {
    pub fn numeric(name: impl Into<String>, kind: ColumnKind) -> Self {
        ColumnSchema {
            name: name.into(),
            kind,
            categories: Vec::new(),
            is_label: false,
        }
    }

    pub fn label(mut self) -> Self {
        self.is_label = true;
        self
    }
}

pub type Cell = Option<f64>;

/// An immutable table. Construction validates the schema invariants, so every
/// `Dataset` in circulation has exactly one label column and in-range
/// categorical codes.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Vec<ColumnSchema>,
    rows: Vec<Vec<Cell>>,
    provenance: String,
}

impl Dataset {
    pub fn new(schema: Vec<ColumnSchema>, rows: Vec<Vec<Cell>>, provenance: impl Into<String>) -> Result<Self> {
        validate_schema(&schema)?;
        for (i, row) in rows.iter().enumerate() {
            validate_row(&schema, row).map_err(|message| Error::Parse { row: i + 1, message })?;
        }
        Ok(Dataset {
            schema,
            rows,
            provenance: provenance.into(),
        })
    }

    /// Builds an all-numeric dataset from a feature matrix and label vector.
    /// Features are continuous, the label is discrete and goes last.
    pub fn from_numeric(
        feature_names: &[String],
        features: &[Vec<f64>],
        labels: &[f64],
        label_name: &str,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Contract(format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let mut schema: Vec<ColumnSchema> = feature_names
            .iter()
            .map(|n| ColumnSchema::numeric(n.clone(), ColumnKind::Continuous))
            .collect();
        schema.push(ColumnSchema::numeric(label_name, ColumnKind::Discrete).label());
        let rows = features
            .iter()
            .zip(labels)
            .map(|(x, &y)| x.iter().map(|&v| Some(v)).chain(std::iter::once(Some(y))).collect())
            .collect();
        Dataset::new(schema, rows, "numeric")
    }

    /// Same schema, different rows. Callers guarantee the rows already
    /// satisfy the schema (they are drawn from an existing dataset).
    pub(crate) fn with_rows(&self, rows: Vec<Vec<Cell>>) -> Self {
        Dataset {
            schema: self.schema.clone(),
            rows,
            provenance: self.provenance.clone(),
        }
    }

    pub(crate) fn from_parts_unchecked(schema: Vec<ColumnSchema>, rows: Vec<Vec<Cell>>, provenance: String) -> Self {
        debug_assert!(validate_schema(&schema).is_ok());
        Dataset {
            schema,
            rows,
            provenance,
        }
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<Vec<Cell>> {
        self.rows
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn with_provenance(mut self, tag: impl Into<String>) -> Self {
        self.provenance = tag.into();
        self
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.schema.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn label_index(&self) -> usize {
        self.schema
            .iter()
            .position(|c| c.is_label)
            .expect("validated dataset has a label column")
    }

    /// Indices of the non-label columns, in schema order.
    pub fn feature_indices(&self) -> Vec<usize> {
        (0..self.schema.len()).filter(|&j| !self.schema[j].is_label).collect()
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.schema
            .iter()
            .filter(|c| !c.is_label)
            .map(|c| c.name.clone())
            .collect()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len() - 1
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = Cell> + '_ {
        self.rows.iter().map(move |r| r[j])
    }

    pub fn has_missing(&self) -> bool {
        self.rows.iter().any(|r| r.iter().any(Option::is_none))
    }

    /// Feature vector of one row. Missing cells are a contract error.
    pub fn features(&self, i: usize) -> Result<Vec<f64>> {
        let label = self.label_index();
        self.rows[i]
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != label)
            .map(|(j, c)| {
                c.ok_or_else(|| Error::Contract(format!("missing value in row {i}, column `{}`", self.schema[j].name)))
            })
            .collect()
    }

    pub fn feature_matrix(&self) -> Result<Vec<Vec<f64>>> {
        (0..self.n_rows()).map(|i| self.features(i)).collect()
    }

    pub fn labels(&self) -> Result<Vec<f64>> {
        let label = self.label_index();
        self.rows
            .iter()
            .enumerate()
            .map(|(i, r)| r[label].ok_or_else(|| Error::Contract(format!("missing label in row {i}"))))
            .collect()
    }

    /// Rows at `indices`, in that order. Indices may repeat.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        self.with_rows(indices.iter().map(|&i| self.rows[i].clone()).collect())
    }

    /// Renders a cell as CSV text: category label, shortest round-trip
    /// number, or empty for missing.
    pub fn format_cell(&self, j: usize, cell: Cell) -> String {
        match cell {
            None => String::new(),
            Some(v) => match self.schema[j].kind {
                ColumnKind::Categorical => self.schema[j].categories[v as usize].clone(),
                _ => format!("{v}"),
            },
        }
    }
}

fn validate_schema(schema: &[ColumnSchema]) -> Result<()> {
    let labels = schema.iter().filter(|c| c.is_label).count();
    if labels != 1 {
        return Err(Error::Schema(format!(
            "expected exactly one label column, found {labels}"
        )));
    }
    let mut names = std::collections::HashSet::new();
    for c in schema {
        if !names.insert(c.name.as_str()) {
            return Err(Error::Schema(format!("duplicate column name `{}`", c.name)));
        }
        match c.kind {
            ColumnKind::Categorical => {
                if c.categories.is_empty() {
                    return Err(Error::Schema(format!(
                        "categorical column `{}` has no categories",
                        c.name
                    )));
                }
                if c.categories.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Schema(format!(
                        "categories of `{}` must be unique and sorted",
                        c.name
                    )));
                }
            }
            _ if !c.categories.is_empty() => {
                return Err(Error::Schema(format!(
                    "numeric column `{}` cannot list categories",
                    c.name
                )));
            }
            _ => {}
        }
    }
    Ok(())
}

fn validate_row(schema: &[ColumnSchema], row: &[Cell]) -> std::result::Result<(), String> {
    if row.len() != schema.len() {
        return Err(format!("expected {} cells, found {}", schema.len(), row.len()));
    }
    for (c, cell) in schema.iter().zip(row) {
        let Some(v) = *cell else { continue };
        if !v.is_finite() {
            return Err(format!("non-finite value in column `{}`", c.name));
        }
        if c.kind == ColumnKind::Categorical && (v < 0.0 || v.fract() != 0.0 || v as usize >= c.categories.len()) {
            return Err(format!("invalid category code {v} in column `{}`", c.name));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Vec<ColumnSchema> {
        vec![
            ColumnSchema::numeric("x", ColumnKind::Continuous),
            ColumnSchema {
                name: "c".into(),
                kind: ColumnKind::Categorical,
                categories: vec!["a".into(), "b".into()],
                is_label: false,
            },
            ColumnSchema::numeric("y", ColumnKind::Discrete).label(),
        ]
    }

    #[test]
    fn rejects_two_labels_or_none() {
        let mut s = schema();
        s[0].is_label = true;
        assert!(matches!(Dataset::new(s, vec![], "t"), Err(Error::Schema(_))));
        let mut s = schema();
        s[2].is_label = false;
        assert!(matches!(Dataset::new(s, vec![], "t"), Err(Error::Schema(_))));
    }

    #[test]
    fn rejects_unsorted_categories_and_bad_codes() {
        let mut s = schema();
        s[1].categories = vec!["b".into(), "a".into()];
        assert!(Dataset::new(s, vec![], "t").is_err());

        let err = Dataset::new(schema(), vec![vec![Some(1.0), Some(2.0), Some(0.0)]], "t");
        assert!(matches!(err, Err(Error::Parse { row: 1, .. })));
    }

    #[test]
    fn rejects_ragged_rows() {
        let err = Dataset::new(schema(), vec![vec![Some(1.0), None]], "t");
        assert!(matches!(err, Err(Error::Parse { row: 1, .. })));
    }

    #[test]
    fn features_skip_label_and_report_missing() {
        let d = Dataset::new(
            schema(),
            vec![vec![Some(1.5), Some(1.0), Some(0.0)], vec![None, Some(0.0), Some(1.0)]],
            "t",
        )
        .unwrap();
        assert_eq!(d.features(0).unwrap(), vec![1.5, 1.0]);
        assert!(matches!(d.features(1), Err(Error::Contract(_))));
        assert_eq!(d.labels().unwrap(), vec![0.0, 1.0]);
        assert_eq!(d.feature_names(), vec!["x".to_string(), "c".to_string()]);
        assert_eq!(d.format_cell(1, Some(1.0)), "b");
    }
}
