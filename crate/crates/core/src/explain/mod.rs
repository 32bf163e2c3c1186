//! Model-agnostic local explanations: a LIME-style weighted ridge surrogate,
//! Kernel SHAP, and a brute-force Shapley oracle.
//!
//! All explainers see the model only through [`Predictor`] and explain the
//! probability of the class the model predicts at `x`.

mod lime;
mod shap;

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::models::Predictor;
use crate::seed::{derive_seed, rng_from_seed};
use crate::tabular::Dataset;
use crate::{Error, Result};

pub use lime::{lime_explain, LimeConfig};
pub use shap::{exact_shapley, shap_explain, CoalitionBudget, ShapConfig, EXACT_MAX_FEATURES, ORACLE_MAX_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExplainerKind {
    Lime,
    Shap,
}

impl fmt::Display for ExplainerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExplainerKind::Lime => "lime",
            ExplainerKind::Shap => "shap",
        })
    }
}

impl FromStr for ExplainerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lime" => Ok(ExplainerKind::Lime),
            "shap" => Ok(ExplainerKind::Shap),
            other => Err(Error::Config(format!("unknown explainer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    /// One entry per feature, in schema order.
    pub attributions: Vec<f64>,
    /// Surrogate intercept (LIME) or base value `f0` (SHAP).
    pub intercept_or_base: f64,
    pub explained_class: usize,
    pub explainer: ExplainerKind,
}

/// Reference rows for an explainer: SHAP marginalizes over them, LIME takes
/// its per-feature perturbation scale from their standard deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    rows: Vec<Vec<f64>>,
    mean: Vec<f64>,
    stddev: Vec<f64>,
}

impl Background {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::Contract("background set is empty".into()));
        };
        let d = first.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Contract("background rows differ in length".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Contract("background contains non-finite values".into()));
        }
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let stddev = (0..d)
            .map(|j| (rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt())
            .collect();
        Ok(Background { rows, mean, stddev })
    }

    /// Feature rows of `d`; missing cells are a contract error.
    pub fn from_dataset(d: &Dataset) -> Result<Self> {
        Background::new(d.feature_matrix()?)
    }

    /// At most `n` rows drawn without replacement (all rows if `n` covers
    /// them, in original order).
    pub fn subsample(&self, n: usize, seed: u64) -> Self {
        if n == 0 || n >= self.rows.len() {
            return self.clone();
        }
        let mut idx = index::sample(&mut rng_from_seed(seed), self.rows.len(), n).into_vec();
        idx.sort_unstable();
        let rows = idx.iter().map(|&i| self.rows[i].clone()).collect();
        Background::new(rows).expect("subset of a valid background")
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Population standard deviation per feature.
    pub fn stddev(&self) -> &[f64] {
        &self.stddev
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ExplainerConfig {
    Lime(LimeConfig),
    Shap(ShapConfig),
}

impl ExplainerConfig {
    pub fn default_for(kind: ExplainerKind) -> Self {
        match kind {
            ExplainerKind::Lime => ExplainerConfig::Lime(LimeConfig::default()),
            ExplainerKind::Shap => ExplainerConfig::Shap(ShapConfig::default()),
        }
    }

    pub fn kind(&self) -> ExplainerKind {
        match self {
            ExplainerConfig::Lime(_) => ExplainerKind::Lime,
            ExplainerConfig::Shap(_) => ExplainerKind::Shap,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExplainerConfig::Lime(c) => c.seed,
            ExplainerConfig::Shap(c) => c.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut c = self.clone();
        match &mut c {
            ExplainerConfig::Lime(l) => l.seed = seed,
            ExplainerConfig::Shap(s) => s.seed = seed,
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ExplainerConfig::Lime(c) => c.validate(),
            ExplainerConfig::Shap(c) => c.validate(),
        }
    }
}

pub fn explain<P: Predictor + ?Sized>(
    m: &P,
    x: &[f64],
    cfg: &ExplainerConfig,
    background: &Background,
) -> Result<Explanation> {
    match cfg {
        ExplainerConfig::Lime(c) => lime_explain(m, x, c, background),
        ExplainerConfig::Shap(c) => shap_explain(m, x, c, background),
    }
}

/// Explains every row of `queries`. Row `i` uses the explainer seed
/// `derive_seed(cfg.seed(), "query", [i])`, so different models explained
/// on the same queries share their random draws.
pub fn explain_batch<P: Predictor + ?Sized>(
    m: &P,
    cfg: &ExplainerConfig,
    queries: &Dataset,
    background: &Background,
) -> Result<Vec<Explanation>> {
    cfg.validate()?;
    let x = queries.feature_matrix()?;
    x.par_iter()
        .enumerate()
        .map(|(i, xi)| {
            explain(
                m,
                xi,
                &cfg.with_seed(derive_seed(cfg.seed(), "query", &[i as u64])),
                background,
            )
        })
        .collect()
}

fn check_input<P: Predictor + ?Sized>(m: &P, x: &[f64], background: &Background) -> Result<()> {
    if x.len() != m.n_features() {
        return Err(Error::Contract(format!(
            "query has {} features, model expects {}",
            x.len(),
            m.n_features()
        )));
    }
    if background.n_features() != x.len() {
        return Err(Error::Contract(format!(
            "background has {} features, query has {}",
            background.n_features(),
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("query contains non-finite values".into()));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod testing {
    use crate::models::Predictor;

    /// Binary black box whose class-0 probability is a given function.
    pub struct Prob<F>(pub usize, pub F);

    impl<F: Fn(&[f64]) -> f64 + Send + Sync> Predictor for Prob<F> {
        fn n_features(&self) -> usize {
            self.0
        }

        fn n_classes(&self) -> usize {
            2
        }

        fn predict_distribution_into(&self, x: &[f64], out: &mut [f64]) {
            let p = (self.1)(x);
            out[0] = p;
            out[1] = 1.0 - p;
        }
    }
}
