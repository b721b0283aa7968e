//! The committed sample in `docs/golden` pins the version 1 model format.
//! If one of these tests fails, a change broke compatibility with existing
//! model files and needs a new format version.

use std::fs;
use std::path::PathBuf;

use erdf::dataio::{load_dataset, load_model, model_to_json};

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../docs/golden")
        .join(name)
}

#[test]
fn golden_model_reserializes_byte_for_byte() {
    let text = fs::read_to_string(golden("model-v1.json")).unwrap();
    let model = load_model(golden("model-v1.json")).unwrap();
    assert_eq!(model_to_json(&model), text);
    assert_eq!(model.n_layers(), 2);
    assert_eq!(model.best_layer, 1);
}

#[test]
fn golden_model_predictions_are_stable() {
    let model = load_model(golden("model-v1.json")).unwrap();
    let data = load_dataset(golden("data.csv"), false).unwrap();
    let predictions = model.predict(data.features()).unwrap();
    let expected = fs::read_to_string(golden("predictions.csv")).unwrap();
    let rows: Vec<Vec<f64>> = expected
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), predictions.nrows());
    for (row, want) in predictions.rows().into_iter().zip(&rows) {
        for (a, b) in row.iter().zip(want) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
