//! End-to-end verification experiments: ε sweeps over repeated trials,
//! verification accuracy for both verifiers, and membership-inference power
//! of the released data.
//!
//! Every pipeline in the enumeration serves once per trial as the
//! researcher's ground truth. For each ε the verifier privatizes the
//! researcher's training data, trains one model per pipeline on it, fits
//! both verifiers on their responses and classifies each researcher model.

mod report;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::explain::{Background, ExplainerConfig};
use crate::ldp::{privatize, PrivacyBudget};
use crate::models::{train, Architecture, TrainConfig};
use crate::preprocess::{
    apply_pipeline, drop_missing, encode_nonnumeric, enumerate_pipelines, EnumerationMode, Pipeline, PipelineLabel,
};
use crate::privattack::{mia_power, AttackConfig};
use crate::seed::derive_seed;
use crate::tabular::{
    draw_synthetic, load_csv, load_schema, make_synthetic, sample_rows, split, Dataset, SchemaSpec, SyntheticSpec,
};
use crate::verify::{
    build_responses, classify, fit_ml_verifier, fit_threshold_verifier, is_correct, DistanceGranularity,
    LabeledResponseSet, LabeledResponses, ResponseVector, Task, Verifier,
};
use crate::{Error, Result};

pub use report::{
    emit_report, render_chart, results_csv, summary_csv, ExperimentReport, Method, Metric, ResultRow, SummaryRow,
    TrialRuntime,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic(SyntheticSpec),
    Csv(CsvSource),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    /// Schema sidecar; the schema is inferred when absent.
    #[serde(default)]
    pub schema: Option<PathBuf>,
    /// Label column for inference; defaults to the last column.
    #[serde(default)]
    pub label: Option<String>,
}

fn default_epsilons() -> Vec<PrivacyBudget> {
    [0.1, 1.0, 10.0, 1000.0]
        .into_iter()
        .map(PrivacyBudget::Finite)
        .chain([PrivacyBudget::Infinite])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataSource,
    pub architecture: Architecture,
    /// Explainer parameters; its seed is replaced by a derived one per trial.
    pub explainer: ExplainerConfig,
    pub task: Task,
    pub enumeration: EnumerationMode,
    pub epsilons: Vec<PrivacyBudget>,
    pub trials: usize,
    pub query_count: usize,
    pub train_fraction: f64,
    pub seed: u64,
    /// ML verifier model; its seed is replaced by a derived one.
    pub verifier: TrainConfig,
    pub granularity: DistanceGranularity,
    /// Background rows kept for SHAP (LIME uses the whole query set).
    pub shap_background: usize,
    pub attack: AttackConfig,
    /// Rows in each of the case and control groups.
    pub attack_group_size: usize,
    pub noise_label: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            data: DataSource::Synthetic(SyntheticSpec::default()),
            architecture: Architecture::Logreg,
            explainer: ExplainerConfig::Lime(Default::default()),
            task: Task::Binary,
            enumeration: EnumerationMode::PaperCompat,
            epsilons: default_epsilons(),
            trials: 5,
            query_count: 500,
            train_fraction: 0.8,
            seed: 0,
            verifier: TrainConfig::new(Architecture::Rforest),
            granularity: DistanceGranularity::PerQuery,
            shap_background: 50,
            attack: AttackConfig::default(),
            attack_group_size: 200,
            noise_label: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::Config("epsilon grid is empty".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.query_count == 0 {
            return Err(Error::Config("query_count must be positive".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.attack_group_size == 0 {
            return Err(Error::Config("attack_group_size must be positive".into()));
        }
        self.explainer.validate()?;
        self.verifier.validate()?;
        self.attack.validate()?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_json(&text)
    }
}

/// Per-ε outcome of one trial.
struct EpsilonOutcome {
    accuracy: Result<(f64, f64)>,
    attack_power: Result<f64>,
}

struct Researcher {
    data: Dataset,
    queries: Dataset,
    background: Background,
    explainer: ExplainerConfig,
    targets: Vec<(PipelineLabel, Vec<ResponseVector>)>,
    control: Dataset,
}

fn load_source(cfg: &ExperimentConfig) -> Result<Option<Dataset>> {
    match &cfg.data {
        DataSource::Synthetic(spec) => {
            // surface spec errors before any trial runs
            make_synthetic(
                &SyntheticSpec {
                    rows: spec.rows.min(64).max(spec.classes),
                    ..spec.clone()
                },
                0,
            )?;
            Ok(None)
        }
        DataSource::Csv(src) => {
            let spec = match &src.schema {
                Some(p) => SchemaSpec::Fixed(load_schema(p)?),
                None => SchemaSpec::Infer {
                    label: src.label.clone(),
                },
            };
            Ok(Some(load_csv(&src.path, &spec)?))
        }
    }
}

/// Trains one model per pipeline on `data` and explains it on `queries`.
/// Pipeline and model seeds depend only on the trial and the pipeline, so
/// researcher and verifier preprocess identical data identically.
fn pipeline_responses(
    cfg: &ExperimentConfig,
    data: &Dataset,
    pipelines: &[(Pipeline, PipelineLabel)],
    setup: &Researcher,
    role: &str,
    trial: usize,
) -> Result<Vec<(PipelineLabel, Vec<ResponseVector>)>> {
    pipelines
        .iter()
        .map(|(p, label)| {
            let ids = [trial as u64, label.class_id as u64];
            let out = apply_pipeline(data, &setup.queries, *p, derive_seed(cfg.seed, "pipeline", &ids))?;
            let tc = TrainConfig {
                architecture: cfg.architecture,
                seed: derive_seed(cfg.seed, "model", &ids),
                ..Default::default()
            };
            let mut model = train(&out.train, &tc)?;
            if let Some(s) = &out.scaler {
                model = model.with_scaler(s);
            }
            let source = format!("{role}:{p}");
            let responses = build_responses(&model, &setup.explainer, &setup.queries, &setup.background, &source)?;
            Ok((label.clone(), responses))
        })
        .collect()
}

fn researcher(cfg: &ExperimentConfig, source: Option<&Dataset>, trial: usize) -> Result<Researcher> {
    let t = trial as u64;
    let seed = |stage: &str| derive_seed(cfg.seed, stage, &[t]);
    let full = match (&cfg.data, source) {
        (_, Some(d)) => d.clone(),
        (DataSource::Synthetic(spec), None) => make_synthetic(spec, seed("data"))?,
        (DataSource::Csv(_), None) => unreachable!("CSV sources are loaded up front"),
    };
    let (data, test) = split(&full, cfg.train_fraction, seed("split"))?;
    let clean = encode_nonnumeric(&drop_missing(&test));
    if clean.is_empty() {
        return Err(Error::Size("no complete test rows to query".into()));
    }
    let n_queries = cfg.query_count.min(clean.n_rows());
    if n_queries < cfg.query_count {
        log::warn!(
            "trial {trial}: only {} complete test rows, using {n_queries} queries instead of {}",
            clean.n_rows(),
            cfg.query_count
        );
    }
    let queries = sample_rows(&clean, n_queries, seed("queries"))?;
    let explainer = cfg.explainer.with_seed(seed("explain"));
    let mut background = Background::from_dataset(&queries)?;
    if matches!(explainer, ExplainerConfig::Shap(_)) {
        background = background.subsample(cfg.shap_background, seed("background"));
    }
    let control = match &cfg.data {
        DataSource::Synthetic(spec) => {
            let spec = SyntheticSpec {
                rows: cfg.attack_group_size,
                duplicate_fraction: 0.0,
                ..spec.clone()
            };
            draw_synthetic(&spec, seed("data"), seed("control"))?
        }
        DataSource::Csv(_) => {
            // held-out rows, minus any that also occur verbatim in D
            let members: HashSet<Vec<Option<u64>>> = data.rows().iter().map(|r| row_key(r)).collect();
            let outside: Vec<usize> = (0..test.n_rows())
                .filter(|&i| !members.contains(&row_key(&test.rows()[i])))
                .collect();
            let pool = test.select(&outside);
            if pool.is_empty() {
                return Err(Error::Size("no held-out rows available as attack controls".into()));
            }
            sample_rows(&pool, cfg.attack_group_size.min(pool.n_rows()), seed("control"))?
        }
    };
    let mut setup = Researcher {
        data,
        queries,
        background,
        explainer,
        targets: Vec::new(),
        control,
    };
    let pipelines = enumerate_pipelines(cfg.enumeration);
    setup.targets = pipeline_responses(cfg, &setup.data, &pipelines, &setup, "researcher", trial)?;
    Ok(setup)
}

fn row_key(row: &[Option<f64>]) -> Vec<Option<u64>> {
    row.iter().map(|c| c.map(|v| (v + 0.0).to_bits())).collect()
}

fn verify_at(
    cfg: &ExperimentConfig,
    setup: &Researcher,
    released: &Dataset,
    trial: usize,
    e: usize,
) -> Result<(f64, f64)> {
    let ids = [trial as u64, e as u64];
    let pipelines = enumerate_pipelines(cfg.enumeration);
    let own = pipeline_responses(cfg, released, &pipelines, setup, "verifier", trial)?;
    let reference = own
        .iter()
        .find(|(l, _)| l.is_proper)
        .map(|(_, r)| r.clone())
        .expect("the enumeration contains the proper pipeline");
    let set = LabeledResponseSet {
        task: cfg.task,
        models: own
            .into_iter()
            .map(|(label, responses)| LabeledResponses { label, responses })
            .collect(),
    };
    let vcfg = TrainConfig {
        seed: derive_seed(cfg.seed, "verifier-ml", &ids),
        ..cfg.verifier.clone()
    };
    let ml = Verifier::Ml(fit_ml_verifier(&set, &vcfg, cfg.granularity)?);
    let threshold = Verifier::Threshold(fit_threshold_verifier(&reference, &set, cfg.granularity)?);
    let mut hits = (0usize, 0usize);
    for (truth, responses) in &setup.targets {
        hits.0 += usize::from(is_correct(&classify(&ml, responses, None)?, truth));
        hits.1 += usize::from(is_correct(&classify(&threshold, responses, Some(&reference))?, truth));
    }
    let n = setup.targets.len() as f64;
    Ok((hits.0 as f64 / n, hits.1 as f64 / n))
}

fn attack_at(cfg: &ExperimentConfig, setup: &Researcher, released: &Dataset, trial: usize) -> Result<f64> {
    let case = sample_rows(
        &setup.data,
        cfg.attack_group_size.min(setup.data.n_rows()),
        derive_seed(cfg.seed, "case", &[trial as u64]),
    )?;
    Ok(mia_power(released, &case, &setup.control, &cfg.attack)?.power)
}

fn run_trial(cfg: &ExperimentConfig, source: Option<&Dataset>, trial: usize) -> Vec<EpsilonOutcome> {
    let setup = match researcher(cfg, source, trial) {
        Ok(s) => s,
        Err(e) => {
            log::error!("trial {trial} failed: {e}");
            let msg = e.to_string();
            return cfg
                .epsilons
                .iter()
                .map(|_| EpsilonOutcome {
                    accuracy: Err(Error::Training(msg.clone())),
                    attack_power: Err(Error::Training(msg.clone())),
                })
                .collect();
        }
    };
    cfg.epsilons
        .iter()
        .enumerate()
        .map(|(e, &budget)| {
            let released = privatize(
                &setup.data,
                budget,
                cfg.noise_label,
                derive_seed(cfg.seed, "ldp", &[trial as u64, e as u64]),
            );
            match released {
                Ok(released) => EpsilonOutcome {
                    accuracy: verify_at(cfg, &setup, &released, trial, e),
                    attack_power: attack_at(cfg, &setup, &released, trial),
                },
                Err(err) => {
                    let msg = err.to_string();
                    EpsilonOutcome {
                        accuracy: Err(err),
                        attack_power: Err(Error::Training(msg)),
                    }
                }
            }
        })
        .collect()
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let source = load_source(cfg)?;
    let mut outcomes = Vec::with_capacity(cfg.trials);
    let mut runtimes = Vec::with_capacity(cfg.trials);
    for trial in 0..cfg.trials {
        let start = Instant::now();
        outcomes.push(run_trial(cfg, source.as_ref(), trial));
        let seconds = start.elapsed().as_secs_f64();
        log::info!("trial {trial} finished in {seconds:.1}s");
        runtimes.push(TrialRuntime { trial, seconds });
    }
    let mut rows = Vec::new();
    for (e, &epsilon) in cfg.epsilons.iter().enumerate() {
        for (trial, per_eps) in outcomes.iter().enumerate() {
            let o = &per_eps[e];
            let power = o.attack_power.as_ref().ok().copied();
            for method in [Method::Ml, Method::Threshold] {
                let (accuracy, status) = match &o.accuracy {
                    Ok((ml, th)) => (Some(if method == Method::Ml { *ml } else { *th }), "ok".to_string()),
                    Err(err) => (None, format!("failed: {err}")),
                };
                rows.push(ResultRow {
                    epsilon,
                    trial,
                    method,
                    accuracy,
                    attack_power: power,
                    status,
                });
            }
        }
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        rows,
        runtimes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_defaults_and_validation() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.epsilons.len(), 5);
        assert!(cfg.epsilons[4].is_infinite());
        let cfg = ExperimentConfig::from_json(r#"{"epsilons":[1, "inf"], "data":{"synthetic":{"rows":300}}}"#).unwrap();
        assert_eq!(cfg.epsilons, vec![PrivacyBudget::Finite(1.0), PrivacyBudget::Infinite]);
        for bad in [
            r#"{"epsilons":[]}"#,
            r#"{"trials":0}"#,
            r#"{"train_fraction":1.0}"#,
            r#"{"bogus":1}"#,
            r#"{"epsilons":[-1]}"#,
        ] {
            assert!(
                matches!(ExperimentConfig::from_json(bad), Err(Error::Config(_))),
                "{bad}"
            );
        }
        let echo = serde_json::to_string(&ExperimentConfig::default()).unwrap();
        assert_eq!(ExperimentConfig::from_json(&echo).unwrap(), ExperimentConfig::default());
    }

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            data: DataSource::Synthetic(SyntheticSpec {
                rows: 300,
                ..Default::default()
            }),
            explainer: ExplainerConfig::Lime(crate::explain::LimeConfig {
                num_samples: 200,
                ..Default::default()
            }),
            epsilons: vec![PrivacyBudget::Finite(1.0), PrivacyBudget::Infinite],
            trials: 2,
            query_count: 30,
            attack_group_size: 40,
            verifier: TrainConfig {
                forest: crate::models::ForestParams {
                    trees: 10,
                    ..Default::default()
                },
                ..TrainConfig::new(Architecture::Rforest)
            },
            ..Default::default()
        }
    }

    #[test]
    fn report_shape_and_determinism() {
        let cfg = small();
        let a = run_experiment(&cfg).unwrap();
        assert_eq!(a.rows.len(), 2 * 2 * 2);
        assert!(a.rows.iter().all(|r| r.status == "ok"));
        assert!(a
            .rows
            .iter()
            .all(|r| r.accuracy.is_some_and(|x| (0.0..=1.0).contains(&x))));
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn failing_trials_are_marked() {
        let mut cfg = small();
        cfg.trials = 1;
        cfg.epsilons = vec![PrivacyBudget::Infinite];
        // every feature cell missing: no complete rows survive
        cfg.data = DataSource::Synthetic(SyntheticSpec {
            rows: 300,
            missing_fraction: 1.0,
            duplicate_fraction: 0.0,
            outlier_fraction: 0.0,
            ..Default::default()
        });
        let r = run_experiment(&cfg).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r
            .rows
            .iter()
            .all(|row| row.accuracy.is_none() && row.status.starts_with("failed")));
    }
}
