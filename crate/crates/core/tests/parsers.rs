//! Replays the fuzz seed corpora through the parsers on stable.

use std::path::PathBuf;

use ppv_core::experiment::ExperimentConfig;
use ppv_core::models::{predict_batch, Predictor, TrainedModel};
use ppv_core::tabular::{parse_schema, read_csv, write_csv_to, Dataset, SchemaSpec};
use ppv_core::verify::read_responses;

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn csv_seeds_round_trip_or_fail_cleanly() {
    let mut parsed = 0;
    for (name, bytes) in seeds("csv_reader") {
        let Ok(d) = read_csv(bytes.as_slice(), &SchemaSpec::default(), &name) else {
            continue;
        };
        let mut out = Vec::new();
        write_csv_to(&d, &mut out).unwrap();
        let again = read_csv(out.as_slice(), &SchemaSpec::Fixed(d.schema().to_vec()), &name).unwrap();
        assert_eq!(again.rows(), d.rows(), "{name}");
        parsed += 1;
    }
    assert!(parsed > 0);
}

#[test]
fn schema_seeds() {
    let results: Vec<bool> = seeds("schema_sidecar")
        .iter()
        .map(|(_, b)| parse_schema(std::str::from_utf8(b).unwrap()).is_ok())
        .collect();
    assert!(results.contains(&true) && results.contains(&false));
}

#[test]
fn model_seeds_load_and_predict() {
    for (name, bytes) in seeds("model_json") {
        let m = TrainedModel::from_json(std::str::from_utf8(&bytes).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
        let p = m.predict_distribution(&vec![0.0; m.n_features()]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9, "{name}");
    }
}

#[test]
fn model_with_truncated_body_is_rejected() {
    let (_, bytes) = seeds("model_json").remove(0);
    let text = String::from_utf8(bytes).unwrap();
    assert!(TrainedModel::from_json(&text[..text.len() / 2]).is_err());
}

#[test]
fn predict_batch_on_empty_queries() {
    let (_, bytes) = seeds("model_json")
        .into_iter()
        .find(|(n, _)| n == "seed-logreg.json")
        .unwrap();
    let m = TrainedModel::from_json(std::str::from_utf8(&bytes).unwrap()).unwrap();
    let empty = Dataset::from_numeric(&m.feature_names, &[], &[], &m.label_name).unwrap();
    assert!(predict_batch(&m, &empty).unwrap().is_empty());
    let wrong = Dataset::from_numeric(&["other".to_string()], &[], &[], "y").unwrap();
    assert!(predict_batch(&m, &wrong).is_err());
}

#[test]
fn response_seeds() {
    let mut ok = 0;
    for (_, bytes) in seeds("response_csv") {
        if let Ok((names, rows)) = read_responses(bytes.as_slice(), "seed") {
            assert!(rows.iter().all(|r| r.values.len() == names.len() + 2));
            ok += 1;
        }
    }
    assert_eq!(ok, 1);
}

#[test]
fn experiment_config_seeds() {
    let mut valid = 0;
    for (name, bytes) in seeds("experiment_config") {
        if let Ok(cfg) = ExperimentConfig::from_json(std::str::from_utf8(&bytes).unwrap()) {
            cfg.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
            valid += 1;
        }
    }
    assert_eq!(valid, 2);
}
