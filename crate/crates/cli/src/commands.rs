use std::fs;
use std::path::{Path, PathBuf};

use ppv_core::experiment::{emit_report, run_experiment, ExperimentConfig, Method};
use ppv_core::explain::{explain_batch, Background, ExplainerConfig, LimeConfig, ShapConfig};
use ppv_core::ldp::{privatize, PrivacyBudget};
use ppv_core::models::{train, Architecture, TrainConfig, TrainedModel};
use ppv_core::preprocess::{
    apply_pipeline, drop_missing, encode_nonnumeric, enumerate_pipelines, EnumerationMode, Pipeline, PipelineLabel,
};
use ppv_core::privattack::{mia_power, AttackConfig};
use ppv_core::tabular::{
    load_csv, load_schema, make_synthetic, write_csv, write_schema, Dataset, SchemaSpec, SyntheticSpec,
};
use ppv_core::verify::{
    build_responses, classify, default_verifier_config, fit_ml_verifier, fit_threshold_verifier, load_responses,
    save_responses, DistanceGranularity, LabeledResponseSet, LabeledResponses, ResponseVector, Task, Verifier,
};
use ppv_core::{Error, Result};

use crate::{Arch, Command, ExplainRun, ExplainerArg, GranularityArg, MethodArg, ModeArg, TableArgs, TaskArg};

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth {
            spec,
            rows,
            features,
            classes,
            seed,
            output,
            schema_output,
        } => {
            let mut spec: SyntheticSpec = match spec {
                Some(p) => read_json(&p)?,
                None => SyntheticSpec::default(),
            };
            spec.rows = rows.unwrap_or(spec.rows);
            spec.features = features.unwrap_or(spec.features);
            spec.classes = classes.unwrap_or(spec.classes);
            let d = make_synthetic(&spec, seed)?;
            write_csv(&d, &output)?;
            if let Some(p) = schema_output {
                write_schema(d.schema(), p)?;
            }
            Ok(())
        }
        Command::Privatize {
            input,
            table,
            epsilon,
            seed,
            noise_label,
            output,
        } => {
            let budget: PrivacyBudget = epsilon.parse()?;
            let d = load_table(&input, &table)?;
            write_csv(&privatize(&d, budget, noise_label, seed)?, output)
        }
        Command::Preprocess {
            input,
            table,
            pipeline,
            mode,
            seed,
            output,
            test,
            test_output,
        } => {
            let p = enumerated(pipeline, mode)?.0;
            let d = load_table(&input, &table)?;
            let held_out = match &test {
                Some(t) => load_csv(t, &SchemaSpec::Fixed(d.schema().to_vec()))?,
                None => d.select(&[]),
            };
            let out = apply_pipeline(&d, &held_out, p, seed)?;
            write_csv(&out.train, output)?;
            if let Some(path) = test_output {
                write_csv(&out.test, path)?;
            }
            Ok(())
        }
        Command::Train {
            arch,
            input,
            table,
            config,
            seed,
            pipeline,
            output,
        } => {
            let mut cfg: TrainConfig = match config {
                Some(p) => read_json(&p)?,
                None => TrainConfig::default(),
            };
            cfg.architecture = architecture(arch);
            cfg.seed = seed;
            let d = load_table(&input, &table)?;
            let model = match pipeline {
                Some(mask) => {
                    let p = Pipeline::from_mask(mask)?;
                    let out = apply_pipeline(&d, &d.select(&[]), p, seed)?;
                    let m = train(&out.train, &cfg)?;
                    match &out.scaler {
                        Some(s) => m.with_scaler(s),
                        None => m,
                    }
                }
                None => train(&encode_nonnumeric(&drop_missing(&d)), &cfg)?,
            };
            model.save(output)
        }
        Command::Explain { run } => explain_cmd(run, false),
        Command::Respond { run } => explain_cmd(run, true),
        Command::FitVerifier {
            method,
            task,
            labeled,
            mode,
            reference,
            granularity,
            config,
            seed,
            output,
        } => {
            let task = match task {
                TaskArg::Binary => Task::Binary,
                TaskArg::Multi => Task::Multi,
            };
            let granularity = match granularity {
                GranularityArg::PerQuery => DistanceGranularity::PerQuery,
                GranularityArg::Concatenated => DistanceGranularity::Concatenated,
            };
            let mut names: Option<Vec<String>> = None;
            let mut models = Vec::new();
            let mut proper_file = None;
            for spec in &labeled {
                let (file, mask) = spec
                    .rsplit_once(':')
                    .ok_or_else(|| Error::Config(format!("expected FILE:MASK, got `{spec}`")))?;
                let mask: u8 = mask
                    .parse()
                    .map_err(|_| Error::Config(format!("`{mask}` is not a pipeline bitmask")))?;
                let (_, label) = enumerated(mask, mode)?;
                let (n, responses) = load_responses(file)?;
                check_names(&mut names, n)?;
                if label.is_proper {
                    proper_file = Some(responses.clone());
                }
                models.push(LabeledResponses { label, responses });
            }
            let set = LabeledResponseSet { task, models };
            let verifier = match method {
                MethodArg::Ml => {
                    let mut cfg = match config {
                        Some(p) => read_json(&p)?,
                        None => default_verifier_config(seed),
                    };
                    cfg.seed = seed;
                    Verifier::Ml(fit_ml_verifier(&set, &cfg, granularity)?)
                }
                MethodArg::Threshold => {
                    let reference = match reference {
                        Some(p) => {
                            let (n, r) = load_responses(p)?;
                            check_names(&mut names, n)?;
                            r
                        }
                        None => proper_file.ok_or_else(|| {
                            Error::Config("threshold verifier needs --reference or a proper labeled file".into())
                        })?,
                    };
                    Verifier::Threshold(fit_threshold_verifier(&reference, &set, granularity)?)
                }
            };
            verifier.save(output)
        }
        Command::Verify {
            verifier,
            target,
            reference,
            output,
        } => {
            let v = Verifier::load(verifier)?;
            let (names, target) = load_responses(target)?;
            let reference: Option<Vec<ResponseVector>> = match reference {
                Some(p) => {
                    let (n, r) = load_responses(p)?;
                    if n != names {
                        return Err(Error::Contract("target and reference have different columns".into()));
                    }
                    Some(r)
                }
                None => None,
            };
            let verdict = classify(&v, &target, reference.as_deref())?;
            let json = serde_json::to_string_pretty(&verdict)?;
            println!("{json}");
            if let Some(p) = output {
                fs::write(&p, json).map_err(|e| io_err(&p, e))?;
            }
            Ok(())
        }
        Command::Attack {
            released,
            case,
            control,
            table,
            fpr,
            bins,
            out,
        } => {
            let released = load_table(&released, &table)?;
            let fixed = SchemaSpec::Fixed(released.schema().to_vec());
            let case = load_csv(case, &fixed)?;
            let control = load_csv(control, &fixed)?;
            let cfg = AttackConfig { target_fpr: fpr, bins };
            let r = mia_power(&released, &case, &control, &cfg)?;
            let summary = serde_json::json!({
                "gamma": r.gamma,
                "power": r.power,
                "target_fpr": fpr,
                "case_size": r.case_distances.len(),
                "control_size": r.control_distances.len(),
            });
            let json = serde_json::to_string_pretty(&summary)?;
            println!("{json}");
            if let Some(dir) = out {
                fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
                let write = |name: &str, text: String| {
                    let p = dir.join(name);
                    fs::write(&p, text).map_err(|e| io_err(&p, e))
                };
                write("attack.json", json)?;
                write("case_distances.csv", distances_csv(&r.case_distances))?;
                write("control_distances.csv", distances_csv(&r.control_distances))?;
            }
            Ok(())
        }
        Command::Experiment { config, out, seed } => {
            let mut cfg = match config {
                Some(p) => ExperimentConfig::load(p)?,
                None => ExperimentConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = run_experiment(&cfg)?;
            emit_report(&report, &out)?;
            for s in report.summary() {
                let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.3}"));
                let method = match s.method {
                    Method::Ml => "ml",
                    Method::Threshold => "threshold",
                };
                println!(
                    "epsilon={:<6} method={:<9} accuracy={} ± {} attack_power={}",
                    s.epsilon.to_string(),
                    method,
                    fmt(s.accuracy_mean),
                    fmt(s.accuracy_sd),
                    fmt(s.attack_power_mean)
                );
            }
            Ok(())
        }
    }
}

fn explain_cmd(run: ExplainRun, responses: bool) -> Result<()> {
    let model = TrainedModel::load(&run.model)?;
    let queries = load_table(&run.input, &run.table)?;
    let queries = encode_nonnumeric(&queries);
    model.check_queries(&queries)?;
    let mut cfg = match (run.explainer, &run.config) {
        (ExplainerArg::Lime, Some(p)) => ExplainerConfig::Lime(read_json::<LimeConfig>(p)?),
        (ExplainerArg::Shap, Some(p)) => ExplainerConfig::Shap(read_json::<ShapConfig>(p)?),
        (ExplainerArg::Lime, None) => ExplainerConfig::Lime(LimeConfig::default()),
        (ExplainerArg::Shap, None) => ExplainerConfig::Shap(ShapConfig::default()),
    };
    cfg = cfg.with_seed(run.seed);
    let background = match &run.background {
        Some(p) => {
            let b = load_csv(p, &SchemaSpec::Fixed(queries.schema().to_vec()))?;
            Background::from_dataset(&encode_nonnumeric(&drop_missing(&b)))?
        }
        None => Background::from_dataset(&queries)?,
    };
    let names = queries.feature_names();
    if responses {
        let r = build_responses(&model, &cfg, &queries, &background, &run.model.display().to_string())?;
        return save_responses(&run.output, &names, &r);
    }
    let explanations = explain_batch(&model, &cfg, &queries, &background)?;
    let mut w = csv_writer(&run.output)?;
    let header = ["query".to_string()]
        .into_iter()
        .chain(names)
        .chain(["intercept_or_base".to_string(), "explained_class".to_string()]);
    w.write_record(header)?;
    for (i, e) in explanations.iter().enumerate() {
        let row = std::iter::once(i.to_string())
            .chain(e.attributions.iter().map(|v| format!("{v}")))
            .chain([
                format!("{}", e.intercept_or_base),
                format!("{}", model.classes[e.explained_class]),
            ]);
        w.write_record(row)?;
    }
    w.flush().map_err(|e| io_err(&run.output, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

fn distances_csv(d: &[usize]) -> String {
    let mut s = String::from("row,min_hamming\n");
    for (i, v) in d.iter().enumerate() {
        s.push_str(&format!("{i},{v}\n"));
    }
    s
}

fn check_names(seen: &mut Option<Vec<String>>, names: Vec<String>) -> Result<()> {
    match seen {
        Some(s) if *s != names => Err(Error::Contract(format!(
            "response files disagree on columns: {s:?} vs {names:?}"
        ))),
        Some(_) => Ok(()),
        None => {
            *seen = Some(names);
            Ok(())
        }
    }
}

fn enumerated(mask: u8, mode: ModeArg) -> Result<(Pipeline, PipelineLabel)> {
    let mode = match mode {
        ModeArg::PaperCompat => EnumerationMode::PaperCompat,
        ModeArg::Full => EnumerationMode::Full,
    };
    let p = Pipeline::from_mask(mask)?;
    enumerate_pipelines(mode)
        .into_iter()
        .find(|(q, _)| *q == p)
        .ok_or_else(|| Error::Config(format!("pipeline {mask} is not part of the {mode:?} enumeration")))
}

fn architecture(a: Arch) -> Architecture {
    match a {
        Arch::Logreg => Architecture::Logreg,
        Arch::Dtree => Architecture::Dtree,
        Arch::Rforest => Architecture::Rforest,
    }
}

fn load_table(path: &Path, t: &TableArgs) -> Result<Dataset> {
    let spec = match &t.schema {
        Some(p) => SchemaSpec::Fixed(load_schema(p)?),
        None => SchemaSpec::Infer { label: t.label.clone() },
    };
    load_csv(path, &spec)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from(path),
        source,
    }
}
