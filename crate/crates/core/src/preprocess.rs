//! Preprocessing steps and proper/improper pipeline enumeration.
//!
//! Dropping missing rows and encoding categorical columns are always applied.
//! The four optional steps run in fixed order: drop duplicates, drop
//! outliers, standardize, oversample. A pipeline is proper when all four are
//! present; each other subset is an improper variant with its own class id.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed::rng_from_seed;
use crate::tabular::{column_stats, ColumnKind, ColumnSchema, Dataset};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Step {
    DropDuplicates,
    DropOutliers,
    Scale,
    Resample,
}

impl Step {
    pub const ALL: [Step; 4] = [Step::DropDuplicates, Step::DropOutliers, Step::Scale, Step::Resample];

    /// Bit position in a pipeline mask; also the application order.
    pub fn bit(self) -> u8 {
        self as u8
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Step::DropDuplicates => "drop-duplicates",
            Step::DropOutliers => "drop-outliers",
            Step::Scale => "scale",
            Step::Resample => "resample",
        })
    }
}

/// Set of optional steps, stored as a 4-bit mask (bit k = step k+1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Pipeline(u8);

impl Pipeline {
    pub const FULL_MASK: u8 = 0b1111;

    pub fn from_mask(mask: u8) -> Result<Self> {
        if mask > Self::FULL_MASK {
            return Err(Error::Config(format!("pipeline mask {mask} has bits beyond step (iv)")));
        }
        Ok(Pipeline(mask))
    }

    pub fn proper() -> Self {
        Pipeline(Self::FULL_MASK)
    }

    pub fn from_steps(steps: &[Step]) -> Self {
        Pipeline(steps.iter().fold(0, |m, s| m | (1 << s.bit())))
    }

    pub fn mask(self) -> u8 {
        self.0
    }

    pub fn contains(self, step: Step) -> bool {
        self.0 & (1 << step.bit()) != 0
    }

    /// Present optional steps in application order.
    pub fn steps(self) -> Vec<Step> {
        Step::ALL.into_iter().filter(|&s| self.contains(s)).collect()
    }

    pub fn omitted(self) -> Vec<Step> {
        Step::ALL.into_iter().filter(|&s| !self.contains(s)).collect()
    }

    pub fn is_proper(self) -> bool {
        self.0 == Self::FULL_MASK
    }
}

impl TryFrom<u8> for Pipeline {
    type Error = Error;

    fn try_from(mask: u8) -> Result<Self> {
        Pipeline::from_mask(mask)
    }
}

impl From<Pipeline> for u8 {
    fn from(p: Pipeline) -> u8 {
        p.0
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.steps().iter().map(Step::to_string).collect();
        if names.is_empty() {
            f.write_str("required-only")
        } else {
            f.write_str(&names.join("+"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineLabel {
    pub class_id: usize,
    pub is_proper: bool,
    pub omitted_steps: Vec<Step>,
}

impl PipelineLabel {
    pub fn of(pipeline: Pipeline, class_id: usize) -> Self {
        PipelineLabel {
            class_id,
            is_proper: pipeline.is_proper(),
            omitted_steps: pipeline.omitted(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnumerationMode {
    /// 1 proper + 14 improper: every non-full subset except the empty one.
    #[default]
    PaperCompat,
    /// 1 proper + all 15 non-full subsets.
    Full,
}

impl std::str::FromStr for EnumerationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-compat" => Ok(EnumerationMode::PaperCompat),
            "full" => Ok(EnumerationMode::Full),
            other => Err(Error::Config(format!("unknown enumeration mode `{other}`"))),
        }
    }
}

/// Labeled pipelines. Class 0 is the proper pipeline; improper pipelines
/// follow in descending mask order.
pub fn enumerate_pipelines(mode: EnumerationMode) -> Vec<(Pipeline, PipelineLabel)> {
    let lowest = match mode {
        EnumerationMode::PaperCompat => 1,
        EnumerationMode::Full => 0,
    };
    std::iter::once(Pipeline::FULL_MASK)
        .chain((lowest..Pipeline::FULL_MASK).rev())
        .enumerate()
        .map(|(id, mask)| {
            let p = Pipeline(mask);
            (p, PipelineLabel::of(p, id))
        })
        .collect()
}

pub fn drop_missing(d: &Dataset) -> Dataset {
    let rows: Vec<_> = d
        .rows()
        .iter()
        .filter(|r| r.iter().all(Option::is_some))
        .cloned()
        .collect();
    if rows.is_empty() && !d.is_empty() {
        log::warn!("dropping missing values removed all {} rows", d.n_rows());
    }
    d.with_rows(rows)
}

/// Categorical columns become discrete columns holding their codes.
pub fn encode_nonnumeric(d: &Dataset) -> Dataset {
    let schema: Vec<ColumnSchema> = d
        .schema()
        .iter()
        .map(|c| match c.kind {
            ColumnKind::Categorical => ColumnSchema {
                name: c.name.clone(),
                kind: ColumnKind::Discrete,
                categories: Vec::new(),
                is_label: c.is_label,
            },
            _ => c.clone(),
        })
        .collect();
    Dataset::from_parts_unchecked(schema, d.rows().to_vec(), d.provenance().to_string())
}

fn row_key(row: &[Option<f64>]) -> Vec<Option<u64>> {
    // + 0.0 folds -0.0 into 0.0
    row.iter().map(|c| c.map(|v| (v + 0.0).to_bits())).collect()
}

/// Keeps the first occurrence of each exact row, label included.
pub fn drop_duplicates(d: &Dataset) -> Dataset {
    let mut seen = HashSet::new();
    let rows = d.rows().iter().filter(|r| seen.insert(row_key(r))).cloned().collect();
    d.with_rows(rows)
}

/// Removes rows with any non-label numeric feature more than three
/// population standard deviations from that feature's mean.
pub fn drop_outliers(d: &Dataset) -> Dataset {
    let bounds: Vec<(usize, f64, f64)> = d
        .feature_indices()
        .into_iter()
        .filter(|&j| d.schema()[j].kind != ColumnKind::Categorical)
        .filter_map(|j| column_stats(d, j).ok().map(|s| (j, s.mean, s.stddev)))
        .filter(|&(_, _, sd)| sd > 0.0)
        .collect();
    let rows = d
        .rows()
        .iter()
        .filter(|r| {
            bounds.iter().all(|&(j, mean, sd)| match r[j] {
                Some(x) => (x - mean).abs() <= 3.0 * sd,
                None => true,
            })
        })
        .cloned()
        .collect();
    d.with_rows(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledColumn {
    pub name: String,
    pub mean: f64,
    pub stddev: f64,
}

/// Standardization parameters fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerState {
    pub columns: Vec<ScaledColumn>,
}

impl ScalerState {
    pub fn transform(&self, name: &str, x: f64) -> Option<f64> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .map(|c| standardize(x, c.mean, c.stddev))
    }
}

fn standardize(x: f64, mean: f64, sd: f64) -> f64 {
    if sd > 0.0 {
        (x - mean) / sd
    } else {
        0.0
    }
}

/// Fits mean and population standard deviation of each non-label numeric
/// column. Columns with no observed values are left out.
pub fn fit_scaler(train: &Dataset) -> ScalerState {
    let columns = train
        .feature_indices()
        .into_iter()
        .filter(|&j| train.schema()[j].kind != ColumnKind::Categorical)
        .filter_map(|j| {
            column_stats(train, j).ok().map(|s| ScaledColumn {
                name: train.schema()[j].name.clone(),
                mean: s.mean,
                stddev: s.stddev,
            })
        })
        .collect();
    ScalerState { columns }
}

pub fn apply_scaler(d: &Dataset, s: &ScalerState) -> Result<Dataset> {
    let mut schema = d.schema().to_vec();
    let mut plan = Vec::with_capacity(s.columns.len());
    for c in &s.columns {
        let j = d
            .column_index(&c.name)
            .ok_or_else(|| Error::Contract(format!("scaler column `{}` not in dataset", c.name)))?;
        if schema[j].is_label || schema[j].kind == ColumnKind::Categorical {
            return Err(Error::Contract(format!("cannot scale column `{}`", c.name)));
        }
        schema[j].kind = ColumnKind::Continuous;
        plan.push((j, c.mean, c.stddev));
    }
    let rows = d
        .rows()
        .iter()
        .map(|r| {
            let mut r = r.clone();
            for &(j, mean, sd) in &plan {
                r[j] = r[j].map(|x| standardize(x, mean, sd));
            }
            r
        })
        .collect();
    Ok(Dataset::from_parts_unchecked(schema, rows, d.provenance().to_string()))
}

/// Oversamples every class up to the majority count by drawing that class's
/// rows with replacement. Original rows come first, in order.
pub fn resample_oversample(d: &Dataset, seed: u64) -> Result<Dataset> {
    let label = d.label_index();
    let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (i, r) in d.rows().iter().enumerate() {
        let y = r[label].ok_or_else(|| Error::Contract(format!("missing label in row {i}")))?;
        groups.entry((y + 0.0).to_bits()).or_default().push(i);
    }
    let majority = groups.values().map(Vec::len).max().unwrap_or(0);
    let mut by_value: Vec<(f64, &Vec<usize>)> = groups.iter().map(|(k, v)| (f64::from_bits(*k), v)).collect();
    by_value.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut rng = rng_from_seed(seed);
    let mut rows = d.rows().to_vec();
    for (_, members) in by_value {
        for _ in members.len()..majority {
            let pick = members[rng.random_range(0..members.len())];
            rows.push(d.rows()[pick].clone());
        }
    }
    Ok(d.with_rows(rows))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub train: Dataset,
    pub test: Dataset,
    pub scaler: Option<ScalerState>,
}

/// Applies the required steps and the pipeline's optional steps to `train`.
/// `test` only gets the required steps and, when scaling is on, the scaler
/// fitted on the processed training rows.
pub fn apply_pipeline(train: &Dataset, test: &Dataset, p: Pipeline, seed: u64) -> Result<PipelineOutput> {
    let mut tr = encode_nonnumeric(&drop_missing(train));
    let mut te = encode_nonnumeric(&drop_missing(test));
    let mut scaler = None;
    for step in p.steps() {
        tr = match step {
            Step::DropDuplicates => drop_duplicates(&tr),
            Step::DropOutliers => drop_outliers(&tr),
            Step::Scale => {
                let s = fit_scaler(&tr);
                te = apply_scaler(&te, &s)?;
                let scaled = apply_scaler(&tr, &s)?;
                scaler = Some(s);
                scaled
            }
            Step::Resample => resample_oversample(&tr, seed)?,
        };
        if tr.is_empty() {
            return Err(Error::Pipeline(format!("no training rows left after {step}")));
        }
    }
    if tr.is_empty() {
        return Err(Error::Pipeline("no training rows left after required steps".into()));
    }
    Ok(PipelineOutput {
        train: tr,
        test: te,
        scaler,
    })
}
