//! Interpretable classifiers behind a black-box predictor interface.
//!
//! Training takes an all-numeric, complete [`Dataset`]; the label column's
//! distinct values become the class list. Feature standardization is never
//! implicit: a model only standardizes its inputs when it was trained through
//! a pipeline with the scaling step, in which case it carries the fitted
//! scaler and accepts unscaled queries.

mod forest;
mod logreg;
mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::preprocess::ScalerState;
use crate::seed::rng_from_seed;
use crate::tabular::{ColumnKind, Dataset};
use crate::{Error, Result};

pub use forest::RandomForest;
pub use logreg::{loss_and_gradient, LogisticRegression};
pub use tree::{gini, DecisionTree, Node};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Black-box access to a probabilistic classifier.
pub trait Predictor: Send + Sync {
    fn n_features(&self) -> usize;

    fn n_classes(&self) -> usize;

    /// Writes the class distribution for `x` into `out` (length `n_classes`).
    fn predict_distribution_into(&self, x: &[f64], out: &mut [f64]);

    fn predict_distribution(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_classes()];
        self.predict_distribution_into(x, &mut out);
        out
    }

    fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.predict_distribution(x))
    }

    fn class_probability(&self, x: &[f64], class: usize) -> f64 {
        self.predict_distribution(x)[class]
    }

    /// Label value of a class index, as written into response vectors.
    fn class_label(&self, class: usize) -> f64 {
        class as f64
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate().skip(1) {
        if v > p[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Logreg,
    Dtree,
    Rforest,
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logreg" => Ok(Architecture::Logreg),
            "dtree" => Ok(Architecture::Dtree),
            "rforest" => Ok(Architecture::Rforest),
            other => Err(Error::Config(format!("unknown architecture `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogRegParams {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            learning_rate: 0.1,
            iterations: 500,
            l2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: Some(8),
            min_samples_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub trees: usize,
    /// Features considered per split; `None` means `round(sqrt(d))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 50,
            max_features: None,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub logreg: LogRegParams,
    pub tree: TreeParams,
    pub forest: ForestParams,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            architecture: Architecture::Logreg,
            logreg: LogRegParams::default(),
            tree: TreeParams::default(),
            forest: ForestParams::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn new(architecture: Architecture) -> Self {
        TrainConfig {
            architecture,
            ..Default::default()
        }
    }

    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.logreg.learning_rate > 0.0) {
            return bad("learning rate must be positive");
        }
        if self.logreg.iterations == 0 {
            return bad("iterations must be positive");
        }
        if !(self.logreg.l2 >= 0.0) {
            return bad("l2 strength must be non-negative");
        }
        if self.tree.max_depth == Some(0) {
            return bad("max depth must be positive");
        }
        if self.tree.min_samples_leaf == 0 {
            return bad("min samples per leaf must be positive");
        }
        if self.forest.trees == 0 {
            return bad("tree count must be positive");
        }
        if self.forest.max_features == Some(0) {
            return bad("max features must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelBody {
    Logreg(LogisticRegression),
    Dtree(DecisionTree),
    Rforest(RandomForest),
}

/// Per-feature standardization applied before the model body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScaler {
    /// `(mean, stddev)` per feature; `None` leaves the feature as is.
    pub features: Vec<Option<(f64, f64)>>,
}

impl InputScaler {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.features)
            .map(|(&v, s)| match *s {
                Some((m, sd)) if sd > 0.0 => (v - m) / sd,
                Some(_) => 0.0,
                None => v,
            })
            .collect()
    }
}

/// A trained classifier with everything needed to serve predictions:
/// feature order, class labels and an optional input scaler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub architecture: Architecture,
    pub feature_names: Vec<String>,
    pub fingerprint: String,
    pub label_name: String,
    pub classes: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaler: Option<InputScaler>,
    pub body: ModelBody,
}

pub fn schema_fingerprint(feature_names: &[String]) -> String {
    let mut h = Sha256::new();
    for name in feature_names {
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Feature matrix and class indices of a training set.
struct TrainingData {
    x: Vec<Vec<f64>>,
    y: Vec<usize>,
    classes: Vec<f64>,
}

fn training_data(d: &Dataset) -> Result<TrainingData> {
    if d.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    if let Some(c) = d.schema().iter().find(|c| c.kind == ColumnKind::Categorical) {
        return Err(Error::Contract(format!(
            "column `{}` is categorical; encode it before training",
            c.name
        )));
    }
    if d.has_missing() {
        return Err(Error::Contract("training data has missing cells".into()));
    }
    let x = d.feature_matrix()?;
    let labels = d.labels()?;
    let mut classes = labels.clone();
    classes.sort_by(f64::total_cmp);
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Training(format!(
            "need at least two classes, found {}",
            classes.len()
        )));
    }
    let y = labels.iter().map(|v| classes.partition_point(|c| c < v)).collect();
    Ok(TrainingData { x, y, classes })
}

pub fn train(data: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    cfg.validate()?;
    let td = training_data(data)?;
    let k = td.classes.len();
    let d = data.n_features();
    let body = match cfg.architecture {
        Architecture::Logreg => ModelBody::Logreg(LogisticRegression::fit(&td.x, &td.y, k, &cfg.logreg)),
        Architecture::Dtree => {
            let all: Vec<usize> = (0..td.x.len()).collect();
            let mut rng = rng_from_seed(cfg.seed);
            ModelBody::Dtree(DecisionTree::fit(&td.x, &td.y, k, &all, &cfg.tree, d, &mut rng))
        }
        Architecture::Rforest => {
            ModelBody::Rforest(RandomForest::fit(&td.x, &td.y, k, &cfg.tree, &cfg.forest, cfg.seed))
        }
    };
    let feature_names = data.feature_names();
    Ok(TrainedModel {
        format_version: MODEL_FORMAT_VERSION,
        architecture: cfg.architecture,
        fingerprint: schema_fingerprint(&feature_names),
        feature_names,
        label_name: data.schema()[data.label_index()].name.clone(),
        classes: td.classes,
        scaler: None,
        body,
    })
}

impl TrainedModel {
    /// Attaches a fitted scaler so the model accepts unscaled inputs.
    pub fn with_scaler(mut self, scaler: &ScalerState) -> Self {
        let features = self
            .feature_names
            .iter()
            .map(|n| scaler.columns.iter().find(|c| &c.name == n).map(|c| (c.mean, c.stddev)))
            .collect();
        self.scaler = Some(InputScaler { features });
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: TrainedModel = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Structural checks for documents read from disk.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        if self.classes.len() < 2 {
            return Err(Error::Schema("model needs at least two classes".into()));
        }
        if self.fingerprint != schema_fingerprint(&self.feature_names) {
            return Err(Error::Schema(
                "model fingerprint does not match its feature names".into(),
            ));
        }
        let d = self.feature_names.len();
        if let Some(s) = &self.scaler {
            if s.features.len() != d {
                return Err(Error::Schema("scaler length does not match feature count".into()));
            }
        }
        let k = self.classes.len();
        let ok = match &self.body {
            ModelBody::Logreg(m) => m.is_consistent(d, k),
            ModelBody::Dtree(t) => t.is_consistent(d, k),
            ModelBody::Rforest(f) => f.is_consistent(d, k),
        };
        if !ok {
            return Err(Error::Schema("model body is inconsistent with its shape".into()));
        }
        Ok(())
    }

    pub fn check_queries(&self, queries: &Dataset) -> Result<()> {
        let names = queries.feature_names();
        if schema_fingerprint(&names) != self.fingerprint {
            return Err(Error::Contract(format!(
                "query features {names:?} do not match model features {:?}",
                self.feature_names
            )));
        }
        Ok(())
    }
}

impl Predictor for TrainedModel {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn n_classes(&self) -> usize {
        self.classes.len()
    }

    fn predict_distribution_into(&self, x: &[f64], out: &mut [f64]) {
        let scaled;
        let x = match &self.scaler {
            Some(s) => {
                scaled = s.apply(x);
                &scaled[..]
            }
            None => x,
        };
        match &self.body {
            ModelBody::Logreg(m) => m.predict_into(x, out),
            ModelBody::Dtree(t) => t.predict_into(x, out),
            ModelBody::Rforest(f) => f.predict_into(x, out),
        }
    }

    fn class_label(&self, class: usize) -> f64 {
        self.classes[class]
    }
}

/// Row-aligned `(class index, distribution)` for every query. The query
/// label column, if any, is ignored.
pub fn predict_batch(m: &TrainedModel, queries: &Dataset) -> Result<Vec<(usize, Vec<f64>)>> {
    m.check_queries(queries)?;
    (0..queries.n_rows())
        .map(|i| {
            let dist = m.predict_distribution(&queries.features(i)?);
            Ok((argmax(&dist), dist))
        })
        .collect()
}
