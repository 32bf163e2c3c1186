#![no_main]

use libfuzzer_sys::fuzz_target;
use ppv_core::models::{Predictor, TrainedModel};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(m) = TrainedModel::from_json(text) else {
        return;
    };
    // a model that loads must predict without panicking
    let x = vec![0.5; m.n_features()];
    let p = m.predict_distribution(&x);
    assert_eq!(p.len(), m.n_classes());
});
