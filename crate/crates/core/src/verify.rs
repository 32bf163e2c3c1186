//! Response assembly and the two verifiers.
//!
//! A response is one query's explanation attributions, the explanation's
//! intercept (LIME) or base value (SHAP), and the predicted label, flattened
//! into a vector of length `d + 2`. The ML verifier learns pipeline labels
//! from response vectors directly; the threshold verifier learns from cosine
//! distances between a model's responses and those of the verifier's own
//! properly preprocessed model.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::explain::{explain_batch, Background, ExplainerConfig};
use crate::models::{train, Architecture, Predictor, TrainConfig, TrainedModel};
use crate::preprocess::PipelineLabel;
use crate::tabular::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseVector {
    /// Row index of the query in the query set.
    pub query_id: usize,
    pub source: String,
    /// `[attributions..., intercept_or_base, yhat]`.
    pub values: Vec<f64>,
}

/// One response per query row, in row order, from [`explain_batch`].
pub fn build_responses<P: Predictor + ?Sized>(
    m: &P,
    explainer: &ExplainerConfig,
    queries: &Dataset,
    background: &Background,
    source: &str,
) -> Result<Vec<ResponseVector>> {
    explainer.validate()?;
    if queries.is_empty() {
        return Err(Error::Contract("query set is empty".into()));
    }
    if queries.n_features() != m.n_features() {
        return Err(Error::Contract(format!(
            "queries have {} features, model expects {}",
            queries.n_features(),
            m.n_features()
        )));
    }
    let explanations = explain_batch(m, explainer, queries, background)?;
    Ok(explanations
        .into_iter()
        .enumerate()
        .map(|(i, e)| {
            let mut values = e.attributions;
            values.push(e.intercept_or_base);
            values.push(m.class_label(e.explained_class));
            ResponseVector {
                query_id: i,
                source: source.to_string(),
                values,
            }
        })
        .collect())
}

pub fn cosine_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!(
            "vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedDistance);
    }
    Ok((1.0 - dot / (na * nb)).clamp(0.0, 2.0))
}

pub fn write_responses<W: Write>(w: W, feature_names: &[String], responses: &[ResponseVector]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let header = feature_names.iter().map(String::as_str).chain(["intercept", "yhat"]);
    out.write_record(header)?;
    for r in responses {
        if r.values.len() != feature_names.len() + 2 {
            return Err(Error::Contract(format!(
                "response for query {} has {} values, expected {}",
                r.query_id,
                r.values.len(),
                feature_names.len() + 2
            )));
        }
        out.write_record(r.values.iter().map(|v| format!("{v}")))?;
    }
    out.flush().map_err(|e| Error::io("<responses>", e))?;
    Ok(())
}

pub fn save_responses(path: impl AsRef<Path>, feature_names: &[String], responses: &[ResponseVector]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_responses(std::io::BufWriter::new(file), feature_names, responses)
}

/// Parses a response CSV. Query ids are row positions; every row gets
/// `source` as its tag.
pub fn read_responses<R: Read>(r: R, source: &str) -> Result<(Vec<String>, Vec<ResponseVector>)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let n = header.len();
    if n < 2 || header[n - 2] != "intercept" || header[n - 1] != "yhat" {
        return Err(Error::Schema("response header must end with `intercept,yhat`".into()));
    }
    let mut responses = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != n {
            return Err(Error::Parse {
                row: i + 1,
                message: format!("expected {n} fields, found {}", record.len()),
            });
        }
        let values = record
            .iter()
            .map(|s| match s.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::Parse {
                    row: i + 1,
                    message: format!("`{s}` is not a finite number"),
                }),
            })
            .collect::<Result<Vec<f64>>>()?;
        responses.push(ResponseVector {
            query_id: i,
            source: source.to_string(),
            values,
        });
    }
    Ok((header[..n - 2].to_vec(), responses))
}

pub fn load_responses(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<ResponseVector>)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_responses(std::io::BufReader::new(file), &path.display().to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    /// Proper vs. improper.
    #[default]
    Binary,
    /// Which pipeline.
    Multi,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Binary => "binary",
            Task::Multi => "multi",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Task::Binary),
            "multi" => Ok(Task::Multi),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

/// Whether each query is a sample (with a majority vote over queries at
/// classification time) or each model's concatenated responses are one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceGranularity {
    #[default]
    PerQuery,
    Concatenated,
}

/// Responses of one model on the shared query set, with its pipeline label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledResponses {
    pub label: PipelineLabel,
    pub responses: Vec<ResponseVector>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledResponseSet {
    pub task: Task,
    pub models: Vec<LabeledResponses>,
}

fn target_class(task: Task, label: &PipelineLabel) -> usize {
    match task {
        Task::Binary => usize::from(!label.is_proper),
        Task::Multi => label.class_id,
    }
}

fn check_aligned(a: &[ResponseVector], b: &[ResponseVector]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Contract(format!(
            "response sets cover {} and {} queries",
            a.len(),
            b.len()
        )));
    }
    for (x, y) in a.iter().zip(b) {
        if x.query_id != y.query_id || x.values.len() != y.values.len() {
            return Err(Error::Contract(format!(
                "responses misaligned at query {} / {}",
                x.query_id, y.query_id
            )));
        }
    }
    Ok(())
}

/// Samples a model's responses contribute under `granularity`.
fn samples(responses: &[ResponseVector], granularity: DistanceGranularity) -> Vec<Vec<f64>> {
    match granularity {
        DistanceGranularity::PerQuery => responses.iter().map(|r| r.values.clone()).collect(),
        DistanceGranularity::Concatenated => {
            vec![responses.iter().flat_map(|r| r.values.iter().copied()).collect()]
        }
    }
}

fn distances(
    reference: &[ResponseVector],
    responses: &[ResponseVector],
    granularity: DistanceGranularity,
) -> Result<Vec<f64>> {
    check_aligned(reference, responses)?;
    samples(reference, granularity)
        .iter()
        .zip(samples(responses, granularity))
        .map(|(a, b)| cosine_distance(a, &b))
        .collect()
}

fn check_set(set: &LabeledResponseSet) -> Result<()> {
    let Some(first) = set.models.first() else {
        return Err(Error::Training("no labeled responses".into()));
    };
    for m in &set.models[1..] {
        check_aligned(&first.responses, &m.responses)?;
    }
    if first.responses.is_empty() {
        return Err(Error::Training("labeled models have no responses".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlVerifier {
    pub task: Task,
    pub granularity: DistanceGranularity,
    /// Known pipeline labels, used to name multi-class verdicts.
    pub labels: Vec<PipelineLabel>,
    pub model: TrainedModel,
}

pub fn default_verifier_config(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        ..TrainConfig::new(Architecture::Rforest)
    }
}

/// Trains the verifier model on one sample per query (or per model) with
/// classes balanced by oversampling.
pub fn fit_ml_verifier(
    set: &LabeledResponseSet,
    cfg: &TrainConfig,
    granularity: DistanceGranularity,
) -> Result<MlVerifier> {
    check_set(set)?;
    let mut x = Vec::new();
    let mut y = Vec::new();
    for m in &set.models {
        let class = target_class(set.task, &m.label) as f64;
        for s in samples(&m.responses, granularity) {
            x.push(s);
            y.push(class);
        }
    }
    balance_classes(&mut x, &mut y);
    let names: Vec<String> = (0..x[0].len()).map(|i| format!("o{i}")).collect();
    let data = Dataset::from_numeric(&names, &x, &y, "target")?;
    let model = train(&data, cfg)?;
    Ok(MlVerifier {
        task: set.task,
        granularity,
        labels: distinct_labels(set),
        model,
    })
}

/// Oversamples every class to the size of the largest by cycling through
/// its samples in order. With one proper model against many improper ones
/// the binary task is otherwise dominated by the improper class.
fn balance_classes(x: &mut Vec<Vec<f64>>, y: &mut Vec<f64>) {
    let mut classes: Vec<f64> = y.clone();
    classes.sort_by(f64::total_cmp);
    classes.dedup();
    let members: Vec<Vec<usize>> = classes
        .iter()
        .map(|c| (0..y.len()).filter(|&i| y[i] == *c).collect())
        .collect();
    let target = members.iter().map(Vec::len).max().unwrap_or(0);
    for (c, idx) in classes.iter().zip(&members) {
        for k in idx.len()..target {
            x.push(x[idx[k % idx.len()]].clone());
            y.push(*c);
        }
    }
}

fn distinct_labels(set: &LabeledResponseSet) -> Vec<PipelineLabel> {
    let mut labels: Vec<PipelineLabel> = Vec::new();
    for m in &set.models {
        if !labels.iter().any(|l| l.class_id == m.label.class_id) {
            labels.push(m.label.clone());
        }
    }
    labels.sort_by_key(|l| l.class_id);
    labels
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "lowercase")]
pub enum ThresholdRule {
    /// Distances above `tau` are improper.
    Binary { tau: f64, min: f64, max: f64 },
    /// Nearest mean distance wins; ties go to the lowest class id.
    Multi { centroids: Vec<(PipelineLabel, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdModel {
    pub task: Task,
    pub granularity: DistanceGranularity,
    pub rule: ThresholdRule,
}

pub fn fit_threshold_verifier(
    reference: &[ResponseVector],
    set: &LabeledResponseSet,
    granularity: DistanceGranularity,
) -> Result<ThresholdModel> {
    check_set(set)?;
    let mut per_model = Vec::with_capacity(set.models.len());
    for m in &set.models {
        per_model.push((m.label.clone(), distances(reference, &m.responses, granularity)?));
    }
    let rule = match set.task {
        Task::Binary => {
            let all: Vec<f64> = per_model.iter().flat_map(|(_, d)| d.iter().copied()).collect();
            let tau = all.iter().sum::<f64>() / all.len() as f64;
            let min = all.iter().copied().fold(f64::INFINITY, f64::min);
            let max = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            ThresholdRule::Binary {
                tau: tau.clamp(min, max),
                min,
                max,
            }
        }
        Task::Multi => {
            let mut centroids: Vec<(PipelineLabel, f64, usize)> = Vec::new();
            for (label, d) in per_model {
                match centroids.iter_mut().find(|(l, _, _)| l.class_id == label.class_id) {
                    Some(c) => {
                        c.1 += d.iter().sum::<f64>();
                        c.2 += d.len();
                    }
                    None => centroids.push((label, d.iter().sum(), d.len())),
                }
            }
            centroids.sort_by_key(|c| c.0.class_id);
            ThresholdRule::Multi {
                centroids: centroids.into_iter().map(|(l, s, n)| (l, s / n as f64)).collect(),
            }
        }
    };
    Ok(ThresholdModel {
        task: set.task,
        granularity,
        rule,
    })
}

impl ThresholdModel {
    fn classify_distance(&self, d: f64) -> usize {
        match &self.rule {
            ThresholdRule::Binary { tau, .. } => usize::from(d > *tau),
            ThresholdRule::Multi { centroids } => {
                let mut best = 0;
                for (i, c) in centroids.iter().enumerate().skip(1) {
                    if (d - c.1).abs() < (d - centroids[best].1).abs() {
                        best = i;
                    }
                }
                centroids[best].0.class_id
            }
        }
    }

    fn labels(&self) -> Vec<PipelineLabel> {
        match &self.rule {
            ThresholdRule::Binary { .. } => Vec::new(),
            ThresholdRule::Multi { centroids } => centroids.iter().map(|c| c.0.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Verifier {
    Ml(MlVerifier),
    Threshold(ThresholdModel),
}

impl Verifier {
    pub fn task(&self) -> Task {
        match self {
            Verifier::Ml(v) => v.task,
            Verifier::Threshold(v) => v.task,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: Verifier = serde_json::from_str(text)?;
        if let Verifier::Ml(m) = &v {
            m.model.validate()?;
        }
        Ok(v)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Verifier::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub task: Task,
    /// Binary: 0 proper, 1 improper. Multi: pipeline class id.
    pub class_id: usize,
    pub is_proper: bool,
    /// The predicted pipeline (multi-class only).
    pub label: Option<PipelineLabel>,
    /// Vote count per class id.
    pub votes: Vec<usize>,
    /// Winning vote fraction.
    pub confidence: f64,
}

/// Classifies every sample of `target`, then takes a majority vote. The
/// threshold verifier needs `reference`, the verifier's proper-model
/// responses on the same queries.
pub fn classify(
    verifier: &Verifier,
    target: &[ResponseVector],
    reference: Option<&[ResponseVector]>,
) -> Result<Verdict> {
    if target.is_empty() {
        return Err(Error::Contract("no target responses".into()));
    }
    let (task, predictions, labels) = match verifier {
        Verifier::Ml(v) => {
            let preds = samples(target, v.granularity)
                .iter()
                .map(|s| {
                    if s.len() != v.model.n_features() {
                        return Err(Error::Contract(format!(
                            "response sample has {} values, verifier expects {}",
                            s.len(),
                            v.model.n_features()
                        )));
                    }
                    Ok(v.model.class_label(v.model.predict(s)) as usize)
                })
                .collect::<Result<Vec<_>>>()?;
            (v.task, preds, v.labels.clone())
        }
        Verifier::Threshold(t) => {
            let reference =
                reference.ok_or_else(|| Error::Contract("the threshold verifier needs reference responses".into()))?;
            let preds = distances(reference, target, t.granularity)?
                .into_iter()
                .map(|d| t.classify_distance(d))
                .collect();
            (t.task, preds, t.labels())
        }
    };
    let n_votes = match task {
        Task::Binary => 2,
        Task::Multi => labels.iter().map(|l| l.class_id + 1).max().unwrap_or(0),
    }
    .max(predictions.iter().max().map_or(0, |m| m + 1));
    let mut votes = vec![0usize; n_votes];
    for &p in &predictions {
        votes[p] += 1;
    }
    // binary ties fail closed (improper); multi ties go to the lowest id
    let class_id = match task {
        Task::Binary => usize::from(votes[1] >= votes[0]),
        Task::Multi => {
            let mut best = 0;
            for (i, &v) in votes.iter().enumerate() {
                if v > votes[best] {
                    best = i;
                }
            }
            best
        }
    };
    let label = match task {
        Task::Binary => None,
        Task::Multi => labels.iter().find(|l| l.class_id == class_id).cloned(),
    };
    let is_proper = match task {
        Task::Binary => class_id == 0,
        Task::Multi => label.as_ref().map_or(class_id == 0, |l| l.is_proper),
    };
    Ok(Verdict {
        task,
        class_id,
        is_proper,
        label,
        confidence: votes[class_id] as f64 / predictions.len() as f64,
        votes,
    })
}

/// Whether `verdict` matches the ground-truth pipeline `truth`.
pub fn is_correct(verdict: &Verdict, truth: &PipelineLabel) -> bool {
    match verdict.task {
        Task::Binary => verdict.is_proper == truth.is_proper,
        Task::Multi => verdict.class_id == truth.class_id,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::LimeConfig;
    use crate::preprocess::{enumerate_pipelines, EnumerationMode, Pipeline};
    use crate::seed::rng_from_seed;
    use rand::Rng;

    fn rv(id: usize, values: Vec<f64>) -> ResponseVector {
        ResponseVector {
            query_id: id,
            source: "t".into(),
            values,
        }
    }

    fn label(mask: u8, id: usize) -> PipelineLabel {
        PipelineLabel::of(Pipeline::from_mask(mask).unwrap(), id)
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_distance(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert!((cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        let d = cosine_distance(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((d - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-12);
        assert!((cosine_distance(&[1.0, 2.0], &[-1.0, -2.0]).unwrap() - 2.0).abs() < 1e-12);
        assert!(matches!(
            cosine_distance(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::UndefinedDistance)
        ));
        assert!(matches!(cosine_distance(&[1.0], &[1.0, 0.0]), Err(Error::Contract(_))));
    }

    #[test]
    fn cosine_is_symmetric_and_scale_invariant() {
        let mut rng = rng_from_seed(1);
        for _ in 0..100 {
            let a: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let b: Vec<f64> = (0..5).map(|_| rng.random_range(-3.0..3.0)).collect();
            let d = cosine_distance(&a, &b).unwrap();
            assert!((d - cosine_distance(&b, &a).unwrap()).abs() < 1e-12);
            let scaled: Vec<f64> = a.iter().map(|v| v * 7.5).collect();
            assert!((d - cosine_distance(&scaled, &b).unwrap()).abs() < 1e-12);
            assert!(cosine_distance(&a, &a).unwrap().abs() < 1e-12);
        }
    }

    #[test]
    fn response_csv_round_trip() {
        let names = vec!["a".to_string(), "b".to_string()];
        let rs = vec![rv(0, vec![0.1, -2.0, 0.5, 1.0]), rv(1, vec![1e-300, 3.0, 0.0, 0.0])];
        let mut buf = Vec::new();
        write_responses(&mut buf, &names, &rs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("a,b,intercept,yhat\n"));
        let (n, back) = read_responses(&buf[..], "t").unwrap();
        assert_eq!(n, names);
        assert_eq!(back, rs);
        assert!(read_responses("a,b\n1,2\n".as_bytes(), "t").is_err());
        assert!(matches!(
            read_responses("a,intercept,yhat\n1,x,0\n".as_bytes(), "t"),
            Err(Error::Parse { row: 1, .. })
        ));
    }

    fn threshold_set(proper: f64, improper: f64) -> (Vec<ResponseVector>, LabeledResponseSet) {
        // reference points along x; a response at angle θ has distance 1 − cos θ
        let reference: Vec<ResponseVector> = (0..4).map(|i| rv(i, vec![1.0, 0.0])).collect();
        let at = |d: f64| {
            let c = 1.0 - d;
            (0..4).map(|i| rv(i, vec![c, (1.0 - c * c).max(0.0).sqrt()])).collect()
        };
        let set = LabeledResponseSet {
            task: Task::Binary,
            models: vec![
                LabeledResponses {
                    label: label(15, 0),
                    responses: at(proper),
                },
                LabeledResponses {
                    label: label(7, 1),
                    responses: at(improper),
                },
            ],
        };
        (reference, set)
    }

    #[test]
    fn binary_threshold_is_mean_distance() {
        let (reference, set) = threshold_set(0.0, 1.0);
        let t = fit_threshold_verifier(&reference, &set, DistanceGranularity::PerQuery).unwrap();
        let ThresholdRule::Binary { tau, min, max } = t.rule else {
            panic!()
        };
        assert!((tau - 0.5).abs() < 1e-12);
        assert!(min <= tau && tau <= max);
        let v = Verifier::Threshold(t);
        let own = classify(&v, &reference, Some(&reference)).unwrap();
        assert!(own.is_proper);
        assert_eq!(own.votes, vec![4, 0]);
        let bad = classify(&v, &set.models[1].responses, Some(&reference)).unwrap();
        assert!(!bad.is_proper);
        assert_eq!(bad.confidence, 1.0);
        assert!(classify(&v, &reference, None).is_err());
        assert!(classify(&v, &reference[..2], Some(&reference)).is_err());
    }

    #[test]
    fn binary_ties_fail_closed() {
        let t = Verifier::Threshold(ThresholdModel {
            task: Task::Binary,
            granularity: DistanceGranularity::PerQuery,
            rule: ThresholdRule::Binary {
                tau: 0.5,
                min: 0.0,
                max: 1.0,
            },
        });
        let reference: Vec<ResponseVector> = (0..2).map(|i| rv(i, vec![1.0, 0.0])).collect();
        let target = vec![rv(0, vec![1.0, 0.0]), rv(1, vec![0.0, 1.0])];
        let v = classify(&t, &target, Some(&reference)).unwrap();
        assert!(!v.is_proper);
        assert_eq!(v.votes, vec![1, 1]);
    }

    #[test]
    fn multi_threshold_nearest_centroid() {
        let reference: Vec<ResponseVector> = (0..3).map(|i| rv(i, vec![1.0, 0.0])).collect();
        let band = |d: f64| -> Vec<ResponseVector> {
            let c = 1.0 - d;
            (0..3).map(|i| rv(i, vec![c, (1.0 - c * c).sqrt()])).collect()
        };
        let pipelines = enumerate_pipelines(EnumerationMode::PaperCompat);
        let models: Vec<LabeledResponses> = pipelines
            .iter()
            .take(4)
            .enumerate()
            .map(|(i, (_, l))| LabeledResponses {
                label: l.clone(),
                responses: band(0.2 * i as f64),
            })
            .collect();
        let set = LabeledResponseSet {
            task: Task::Multi,
            models: models.clone(),
        };
        let t = Verifier::Threshold(fit_threshold_verifier(&reference, &set, DistanceGranularity::PerQuery).unwrap());
        for m in &models {
            let v = classify(&t, &m.responses, Some(&reference)).unwrap();
            assert!(is_correct(&v, &m.label));
            assert_eq!(v.label.as_ref(), Some(&m.label));
        }
    }

    fn clusters(task: Task, seed: u64, shuffle: bool) -> LabeledResponseSet {
        let mut rng = rng_from_seed(seed);
        let pipelines = enumerate_pipelines(EnumerationMode::PaperCompat);
        let mut models: Vec<LabeledResponses> = pipelines
            .iter()
            .take(4)
            .map(|(_, l)| {
                let center = l.class_id as f64 * 3.0;
                LabeledResponses {
                    label: l.clone(),
                    responses: (0..40)
                        .map(|i| {
                            rv(
                                i,
                                vec![
                                    center + rng.random_range(-0.5..0.5),
                                    1.0 + rng.random_range(-0.5..0.5),
                                    1.0,
                                ],
                            )
                        })
                        .collect(),
                }
            })
            .collect();
        if shuffle {
            // permute response rows across models so labels carry no signal
            let n = models[0].responses.len();
            for i in 0..n {
                for a in 0..models.len() {
                    let b = rng.random_range(0..models.len());
                    let tmp = models[a].responses[i].values.clone();
                    models[a].responses[i].values = models[b].responses[i].values.clone();
                    models[b].responses[i].values = tmp;
                }
            }
        }
        LabeledResponseSet { task, models }
    }

    fn heldout_accuracy(v: &Verifier, set: &LabeledResponseSet) -> f64 {
        let mut hit = 0;
        let mut total = 0;
        for m in &set.models {
            for r in &m.responses {
                let verdict = classify(v, std::slice::from_ref(r), None).unwrap();
                hit += usize::from(is_correct(&verdict, &m.label));
                total += 1;
            }
        }
        hit as f64 / total as f64
    }

    #[test]
    fn ml_verifier_separable_and_shuffled() {
        let cfg = default_verifier_config(3);
        let train_set = clusters(Task::Multi, 1, false);
        let v = Verifier::Ml(fit_ml_verifier(&train_set, &cfg, DistanceGranularity::PerQuery).unwrap());
        assert_eq!(heldout_accuracy(&v, &clusters(Task::Multi, 2, false)), 1.0);

        let noisy = clusters(Task::Multi, 5, true);
        let v = Verifier::Ml(fit_ml_verifier(&noisy, &cfg, DistanceGranularity::PerQuery).unwrap());
        let acc = heldout_accuracy(&v, &clusters(Task::Multi, 6, true));
        assert!((acc - 0.25).abs() < 0.1, "{acc}");
    }

    #[test]
    fn ml_verifier_resubstitution_and_json() {
        let set = clusters(Task::Binary, 7, false);
        let v =
            Verifier::Ml(fit_ml_verifier(&set, &default_verifier_config(0), DistanceGranularity::PerQuery).unwrap());
        for m in &set.models {
            let verdict = classify(&v, &m.responses, None).unwrap();
            assert_eq!(verdict.is_proper, m.label.is_proper);
            assert_eq!(verdict.votes.iter().sum::<usize>(), m.responses.len());
        }
        let back = Verifier::from_json(&v.to_json().unwrap()).unwrap();
        assert_eq!(back, v);
        let single = LabeledResponseSet {
            task: Task::Binary,
            models: vec![set.models[1].clone()],
        };
        assert!(matches!(
            fit_ml_verifier(&single, &default_verifier_config(0), DistanceGranularity::PerQuery),
            Err(Error::Training(_))
        ));
    }

    #[test]
    fn balancing_equalizes_class_counts() {
        let mut x: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64]).collect();
        let mut y = vec![0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 2.0];
        balance_classes(&mut x, &mut y);
        for c in [0.0, 1.0, 2.0] {
            assert_eq!(y.iter().filter(|&&v| v == c).count(), 5);
        }
        assert!(x.iter().zip(&y).filter(|(_, &c)| c == 0.0).all(|(r, _)| r[0] == 0.0));
    }

    #[test]
    fn concatenated_granularity_votes_once() {
        let (reference, set) = threshold_set(0.1, 0.9);
        let t =
            Verifier::Threshold(fit_threshold_verifier(&reference, &set, DistanceGranularity::Concatenated).unwrap());
        let v = classify(&t, &set.models[1].responses, Some(&reference)).unwrap();
        assert_eq!(v.votes.iter().sum::<usize>(), 1);
        assert!(!v.is_proper);
    }

    struct Constant;

    impl Predictor for Constant {
        fn n_features(&self) -> usize {
            3
        }
        fn n_classes(&self) -> usize {
            2
        }
        fn predict_distribution_into(&self, _: &[f64], out: &mut [f64]) {
            out.copy_from_slice(&[0.3, 0.7]);
        }
    }

    #[test]
    fn responses_have_fixed_shape_and_are_deterministic() {
        let mut rng = rng_from_seed(0);
        let x: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let names: Vec<String> = (0..3).map(|i| format!("f{i}")).collect();
        let q = Dataset::from_numeric(&names, &x, &[0.0; 20], "label").unwrap();
        let bg = Background::from_dataset(&q).unwrap();
        let cfg = ExplainerConfig::Lime(LimeConfig {
            num_samples: 100,
            ..Default::default()
        });
        let r = build_responses(&Constant, &cfg, &q, &bg, "c").unwrap();
        assert_eq!(r.len(), 20);
        assert!(r.iter().all(|v| v.values.len() == 5));
        assert!(r
            .iter()
            .all(|v| v.values[..3].iter().all(|a| a.abs() < 1e-9) && v.values[4] == 1.0));
        assert_eq!(r, build_responses(&Constant, &cfg, &q, &bg, "c").unwrap());
    }
}
