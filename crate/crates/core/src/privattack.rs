//! Hamming-distance membership inference against a released dataset.
//!
//! A candidate row's score is its minimum Hamming distance to the released
//! rows. The threshold γ is set on a control group known to be outside the
//! original data so that a fraction `target_fpr` of controls would be
//! flagged; the attack's power is the fraction of true members scoring
//! strictly below γ.
//!
//! Cells are compared after quantization with the released data's column
//! ranges: continuous columns fall into equal-width bins, discrete and
//! categorical columns compare exactly, and missing matches only missing.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::tabular::{column_stats, Cell, ColumnKind, Dataset};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub target_fpr: f64,
    /// Equal-width bins per continuous column.
    pub bins: usize,
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig {
            target_fpr: 0.05,
            bins: 30,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.target_fpr > 0.0 && self.target_fpr < 1.0) {
            return Err(Error::Config(format!(
                "target false-positive rate must be in (0, 1), got {}",
                self.target_fpr
            )));
        }
        if self.bins == 0 {
            return Err(Error::Config("bin count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub gamma: f64,
    pub power: f64,
    pub case_distances: Vec<usize>,
    pub control_distances: Vec<usize>,
}

const MISSING: u64 = u64::MAX;

#[derive(Debug, Clone, Copy)]
enum Quant {
    Bins { min: f64, width: f64, bins: usize },
    Exact,
}

/// Released rows reduced to comparison keys.
#[derive(Debug, Clone)]
pub struct HammingIndex {
    names: Vec<String>,
    quant: Vec<Quant>,
    keys: Vec<Vec<u64>>,
}

impl HammingIndex {
    pub fn new(released: &Dataset, bins: usize) -> Result<Self> {
        if released.is_empty() {
            return Err(Error::Contract("released dataset is empty".into()));
        }
        let quant = released
            .schema()
            .iter()
            .enumerate()
            .map(|(j, c)| match c.kind {
                ColumnKind::Continuous => match column_stats(released, j) {
                    Ok(s) => Ok(Quant::Bins {
                        min: s.min,
                        width: s.range() / bins as f64,
                        bins,
                    }),
                    Err(Error::EmptyStats(_)) => Ok(Quant::Exact),
                    Err(e) => Err(e),
                },
                _ => Ok(Quant::Exact),
            })
            .collect::<Result<Vec<_>>>()?;
        let mut index = HammingIndex {
            names: released.schema().iter().map(|c| c.name.clone()).collect(),
            quant,
            keys: Vec::new(),
        };
        index.keys = released.rows().iter().map(|r| index.key(r)).collect();
        Ok(index)
    }

    fn key(&self, row: &[Cell]) -> Vec<u64> {
        row.iter()
            .zip(&self.quant)
            .map(|(cell, q)| match (cell, q) {
                (None, _) => MISSING,
                (Some(v), Quant::Bins { min, width, bins }) => {
                    if *width > 0.0 {
                        (((v - min) / width).floor().max(0.0) as u64).min(*bins as u64 - 1)
                    } else {
                        0
                    }
                }
                (Some(v), Quant::Exact) => (v + 0.0).to_bits(),
            })
            .collect()
    }

    pub fn check_schema(&self, d: &Dataset) -> Result<()> {
        let names: Vec<&str> = d.schema().iter().map(|c| c.name.as_str()).collect();
        if names != self.names {
            return Err(Error::Contract(format!(
                "columns {names:?} do not match released columns {:?}",
                self.names
            )));
        }
        Ok(())
    }

    /// Minimum number of differing cells between `row` and any released row.
    pub fn min_distance(&self, row: &[Cell]) -> usize {
        let k = self.key(row);
        self.keys
            .iter()
            .map(|r| r.iter().zip(&k).filter(|(a, b)| a != b).count())
            .min()
            .expect("index is non-empty")
    }

    fn min_distances(&self, d: &Dataset) -> Result<Vec<usize>> {
        self.check_schema(d)?;
        Ok(d.rows().par_iter().map(|r| self.min_distance(r)).collect())
    }
}

pub fn min_hamming(sample: &[Cell], released: &Dataset, bins: usize) -> Result<usize> {
    let index = HammingIndex::new(released, bins)?;
    if sample.len() != index.names.len() {
        return Err(Error::Contract(format!(
            "sample has {} cells, released rows have {}",
            sample.len(),
            index.names.len()
        )));
    }
    Ok(index.min_distance(sample))
}

/// Lower empirical quantile: the sorted value at `floor(q·(n−1))`.
fn lower_quantile(values: &[usize], q: f64) -> usize {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    sorted[(q * (sorted.len() - 1) as f64).floor() as usize]
}

pub fn mia_power(released: &Dataset, case: &Dataset, control: &Dataset, cfg: &AttackConfig) -> Result<AttackResult> {
    cfg.validate()?;
    if case.is_empty() || control.is_empty() {
        return Err(Error::Contract("case and control groups must be non-empty".into()));
    }
    let index = HammingIndex::new(released, cfg.bins)?;
    let case_distances = index.min_distances(case)?;
    let control_distances = index.min_distances(control)?;
    let gamma = lower_quantile(&control_distances, cfg.target_fpr);
    let hits = case_distances.iter().filter(|&&d| d < gamma).count();
    Ok(AttackResult {
        gamma: gamma as f64,
        power: hits as f64 / case_distances.len() as f64,
        case_distances,
        control_distances,
    })
}
