mod common;

use std::path::Path;

use common::{pipeline_fixture, raw_reviews_csv, run_pipeline, sentiscope};
use sentiscope::data::{generate_synthetic_reviews, TabularDataset};
use sentiscope::lexicon::SentimentLabel;
use sentiscope::models::{self, Algorithm, ModelSpec, Target, Task, TrainedModel};
use serde_json::Value;

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn read_table(path: &Path) -> TabularDataset {
    TabularDataset::read_csv(std::fs::File::open(path).unwrap(), &[]).unwrap()
}

#[test]
fn synth_writes_deterministic_feature_table() {
    let dir = tempfile::tempdir().unwrap();
    let r = sentiscope(
        dir.path(),
        &["synth", "--rows", "2000", "--set", "output_dir=x"],
        None,
    );
    assert_eq!(r.code, 2, "unknown top-level key must be rejected");
    let r = sentiscope(dir.path(), &["synth", "--rows", "2000"], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let path = dir.path().join("out/synth/features.csv");
    let first = std::fs::read(&path).unwrap();
    let ds = read_table(&path);
    assert_eq!(ds.row_count(), 2000);
    assert_eq!(ds.columns().len(), 11);
    let ratings = ds.dense_numeric("rating").unwrap();
    assert!(ratings
        .iter()
        .all(|r| (1.0..=5.0).contains(r) && r.fract() == 0.0));
    assert_eq!(
        sentiscope(dir.path(), &["synth", "--rows", "2000"], None).code,
        0
    );
    assert_eq!(std::fs::read(&path).unwrap(), first);
    let expected = generate_synthetic_reviews(2000, 42)
        .unwrap()
        .to_csv_string()
        .unwrap();
    assert_eq!(String::from_utf8(first).unwrap(), expected);
    assert_eq!(
        sentiscope(dir.path(), &["synth", "--rows", "5"], None).code,
        2
    );
}

#[test]
fn seed_env_and_set_precedence_reach_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"seed": 1}"#).unwrap();
    let base = ["synth", "--rows", "50", "--config", "c.json"];
    let manifest = dir.path().join("out/synth/manifest.json");
    let seed_of = |extra: &[&str], env: Option<&str>| {
        let mut args = base.to_vec();
        args.extend(extra);
        assert_eq!(sentiscope(dir.path(), &args, env).code, 0);
        read_json(&manifest)["runs"]["synth"]["config"]["seed"]
            .as_u64()
            .unwrap()
    };
    assert_eq!(seed_of(&[], None), 1);
    assert_eq!(seed_of(&[], Some("2")), 2);
    assert_eq!(seed_of(&["--set", "seed=3"], Some("2")), 3);
}

#[test]
fn prepare_reports_screened_columns() {
    let dir = tempfile::tempdir().unwrap();
    pipeline_fixture(dir.path(), 120);
    let r = sentiscope(dir.path(), &["prepare", "--config", "config.json"], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report = read_json(&dir.path().join("out/prepare/screening_report.json"));
    let names = |key: &str| -> Vec<String> {
        report[key]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.get("column").unwrap_or(v).as_str().unwrap().to_string())
            .collect()
    };
    let uniform = names("dropped_uniform");
    assert!(uniform.contains(&"country".to_string()), "{uniform:?}");
    assert!(uniform.contains(&"primaryCategories".to_string()));
    assert_eq!(names("dropped_missing"), ["postalCode", "reviews.userCity"]);
    assert!(names("dropped_technical").contains(&"reviews.username".to_string()));
    let kept = names("kept");
    assert!(
        kept.contains(&"reviews.text".to_string()) && kept.contains(&"reviews.rating".to_string())
    );

    let manifest = read_json(&dir.path().join("out/prepare/manifest.json"));
    assert_eq!(manifest["command"], "prepare");
    let files = manifest["runs"]["prepare"]["files"].as_array().unwrap();
    assert_eq!(files.len(), 2);
    assert_eq!(
        manifest["runs"]["prepare"]["config"]["extract"]["holdout_size"],
        40
    );
}

#[test]
fn prepare_on_clean_input_drops_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let clean = "reviews.rating,reviews.text,city\n1,bad,Austin\n5,good,Boston\n";
    std::fs::write(dir.path().join("clean.csv"), clean).unwrap();
    let r = sentiscope(
        dir.path(),
        &["prepare", "--set", "paths.input_csv=clean.csv"],
        None,
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report = read_json(&dir.path().join("out/prepare/screening_report.json"));
    for key in ["dropped_uniform", "dropped_missing", "dropped_technical"] {
        assert_eq!(report[key].as_array().unwrap().len(), 0, "{key}");
    }
}

#[test]
fn usage_and_input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = sentiscope(
        dir.path(),
        &["prepare", "--set", "paths.input_csv=nope.csv"],
        None,
    );
    assert_eq!(missing.code, 2);
    assert!(missing.stderr.contains("nope.csv"), "{}", missing.stderr);
    assert_eq!(sentiscope(dir.path(), &["prepare"], None).code, 2);
    assert_eq!(
        sentiscope(dir.path(), &["train", "--algorithm", "svm"], None).code,
        2
    );
    assert_eq!(
        sentiscope(dir.path(), &["benchmark", "--task", "ranking"], None).code,
        2
    );
    assert_eq!(sentiscope(dir.path(), &["frobnicate"], None).code, 2);
    assert_eq!(
        sentiscope(dir.path(), &["stats", "--config", "absent.json"], None).code,
        2
    );
    assert_eq!(sentiscope(dir.path(), &["stats"], None).code, 2);
    assert_eq!(sentiscope(dir.path(), &["--help"], None).code, 0);
}

#[test]
fn extract_splits_usable_rows() {
    let dir = tempfile::tempdir().unwrap();
    pipeline_fixture(dir.path(), 150);
    assert_eq!(
        sentiscope(dir.path(), &["prepare", "--config", "config.json"], None).code,
        0
    );
    let r = sentiscope(dir.path(), &["extract", "--config", "config.json"], None);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let train = read_table(&dir.path().join("out/extract/features.csv"));
    let holdout = read_table(&dir.path().join("out/extract/holdout.csv"));
    assert_eq!((train.row_count(), holdout.row_count()), (110, 40));
    let mut expected = SentimentLabel::column_names();
    expected.push("rating".into());
    assert_eq!(train.column_names(), expected);
    let summary = read_json(&dir.path().join("out/extract/extraction_summary.json"));
    assert_eq!(summary["usable_rows"], 150);
    let zero = sentiscope(
        dir.path(),
        &[
            "extract",
            "--config",
            "config.json",
            "--set",
            "extract.holdout_size=0",
        ],
        None,
    );
    assert_eq!(zero.code, 2);
}

#[test]
fn stats_emit_histograms_and_flag_constant_columns() {
    let dir = tempfile::tempdir().unwrap();
    let ds = generate_synthetic_reviews(200, 3).unwrap();
    let mut csv = ds.to_csv_string().unwrap();
    // zero out the anger column
    let lines: Vec<String> = csv
        .lines()
        .enumerate()
        .map(|(i, l)| {
            let mut cells: Vec<&str> = l.split(',').collect();
            if i > 0 {
                cells[0] = "0";
            }
            cells.join(",")
        })
        .collect();
    csv = lines.join("\n") + "\n";
    std::fs::write(dir.path().join("f.csv"), csv).unwrap();
    let r = sentiscope(
        dir.path(),
        &["stats", "--set", "paths.features_csv=f.csv"],
        None,
    );
    assert_eq!(r.code, 0, "{}", r.stderr);
    let svg = std::fs::read_to_string(dir.path().join("out/stats/histogram_grid_sentiments.svg"))
        .unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let panels = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("panel"))
        .count();
    assert_eq!(panels, 10);
    let sidecar = std::fs::read_to_string(
        dir.path()
            .join("out/stats/correlation_heatmap_sentiments.csv"),
    )
    .unwrap();
    assert!(sidecar
        .lines()
        .any(|l| l.starts_with("anger,") && l.contains("constant_pair")));
}

#[test]
fn benchmark_train_and_explain_on_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let config = pipeline_fixture(dir.path(), 260);
    run_pipeline(dir.path(), &config);
    let out = dir.path().join("out");

    let class = read_json(&out.join("benchmark/benchmark_classification.json"));
    let nir = class["no_information_rate"].as_f64().unwrap();
    assert!(nir > 0.0 && nir <= 1.0);
    assert_eq!(class["algorithms"].as_array().unwrap().len(), 4);
    let reg = read_json(&out.join("benchmark/benchmark_regression.json"));
    assert!(reg.get("no_information_rate").is_none());
    let manifest = read_json(&out.join("benchmark/manifest.json"));
    assert!(
        manifest["runs"]["regression"].is_object()
            && manifest["runs"]["classification"].is_object()
    );

    // the saved model reproduces an in-memory fit
    let model_text = std::fs::read_to_string(out.join("train/model_random_forest.json")).unwrap();
    let loaded = TrainedModel::from_json(&model_text).unwrap();
    let train = read_table(&out.join("extract/features.csv"));
    let x = train
        .feature_matrix(&SentimentLabel::column_names())
        .unwrap();
    let y = train.dense_numeric("rating").unwrap();
    let mut spec = ModelSpec::with_defaults(Algorithm::RandomForest, Task::Regression, 5);
    if let models::Hyperparameters::RandomForest(p) = &mut spec.params {
        p.tree_count = 25;
    }
    let fresh = models::fit(&spec, &x, &Target::Regression(y)).unwrap();
    assert_eq!(loaded.predict(&x).unwrap(), fresh.predict(&x).unwrap());

    let breakdown = read_json(&out.join("explain/breakdown.json"));
    assert_eq!(breakdown["instances"].as_array().unwrap().len(), 4);
    assert_eq!(breakdown["averages"].as_array().unwrap().len(), 2);
    let whatif = read_json(&out.join("explain/whatif.json"));
    assert_eq!(whatif["features"].as_array().unwrap().len(), 4);
    for group in whatif["groups"].as_array().unwrap() {
        assert_eq!(group["averages"].as_array().unwrap().len(), 4);
    }
    let importance = read_json(&out.join("explain/importance.json"));
    let top: Vec<&str> = importance["features"].as_array().unwrap()[..4]
        .iter()
        .map(|f| f["feature"].as_str().unwrap())
        .collect();
    let chosen: Vec<&str> = whatif["features"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap())
        .collect();
    assert_eq!(top, chosen);

    let explain_manifest = read_json(&out.join("explain/manifest.json"));
    for mode in ["importance", "breakdown", "whatif"] {
        assert!(
            explain_manifest["runs"][mode]["files"]
                .as_array()
                .unwrap()
                .len()
                >= 3,
            "{mode}"
        );
    }

    let short = sentiscope(
        dir.path(),
        &[
            "explain",
            "--mode",
            "breakdown",
            "--config",
            "config.json",
            "--set",
            "explain.selection.1=500",
        ],
        None,
    );
    assert_eq!(short.code, 1);
    assert!(short.stderr.contains("rating 1"), "{}", short.stderr);

    let classifier = sentiscope(
        dir.path(),
        &[
            "train",
            "--algorithm",
            "cart",
            "--config",
            "config.json",
            "--set",
            "train.task=classification",
        ],
        None,
    );
    assert_eq!(classifier.code, 0, "{}", classifier.stderr);
    let refuse = sentiscope(
        dir.path(),
        &[
            "explain",
            "--mode",
            "importance",
            "--config",
            "config.json",
            "--set",
            "explain.algorithm=cart",
        ],
        None,
    );
    assert_eq!(refuse.code, 1);
}

#[test]
fn raw_fixture_has_vendor_schema() {
    let csv = raw_reviews_csv(30, 1);
    let ds = TabularDataset::read_csv(csv.as_bytes(), &["reviews.text"]).unwrap();
    assert_eq!(ds.row_count(), 30);
    assert!(ds.column("country").is_ok());
}
