use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::{Error, Result};

/// Summary of the observed (non-missing) cells of one column. Categorical
/// columns are summarized over their category codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub stddev: f64,
    pub distinct_values: Vec<f64>,
    pub missing_count: usize,
}

impl ColumnStats {
    pub fn from_values(values: &[f64], missing_count: usize) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let mut distinct = values.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let min = distinct[0];
        let max = distinct[distinct.len() - 1];
        Some(ColumnStats {
            min,
            max,
            // rounding can push the mean a hair outside [min, max]
            mean: mean.clamp(min, max),
            stddev: var.sqrt(),
            distinct_values: distinct,
            missing_count,
        })
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

pub fn column_stats(d: &Dataset, col: usize) -> Result<ColumnStats> {
    let name = &d
        .schema()
        .get(col)
        .ok_or_else(|| Error::Contract(format!("no column {col}")))?
        .name;
    let values: Vec<f64> = d.column(col).flatten().collect();
    let missing = d.n_rows() - values.len();
    ColumnStats::from_values(&values, missing).ok_or_else(|| Error::EmptyStats(name.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{read_csv, SchemaSpec};

    fn one_col(values: &str) -> Dataset {
        let text: String = std::iter::once("x,y\n".to_string())
            .chain(values.split(' ').map(|v| format!("{v},0\n")))
            .collect();
        read_csv(text.as_bytes(), &SchemaSpec::default(), "t").unwrap()
    }

    #[test]
    fn population_stddev() {
        let s = column_stats(&one_col("1 2 3"), 0).unwrap();
        assert_eq!((s.min, s.max, s.mean), (1.0, 3.0, 2.0));
        assert!((s.stddev - (2.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((s.stddev - 0.8165).abs() < 1e-4);
    }

    #[test]
    fn constant_column() {
        let s = column_stats(&one_col("5 5 5"), 0).unwrap();
        assert_eq!(s.stddev, 0.0);
        assert_eq!(s.distinct_values, vec![5.0]);
    }

    #[test]
    fn categorical_uses_codes() {
        let s = column_stats(&one_col("a b a"), 0).unwrap();
        assert_eq!((s.min, s.max), (0.0, 1.0));
    }

    #[test]
    fn all_missing_is_an_error() {
        let d = one_col("? ?");
        assert!(matches!(column_stats(&d, 0), Err(Error::EmptyStats(_))));
    }
}
