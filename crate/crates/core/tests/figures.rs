use sentiscope::benchmark::{AlgorithmResult, BenchmarkResult, ResampleValue};
use sentiscope::data::{histogram_values, CorrelationMatrix};
use sentiscope::explain::{
    breakdown, ceteris_paribus, make_explainer, permutation_importance, Loss,
};
use sentiscope::figures::{
    emit_figure, emit_sidecar, sidecar_rows, write_figure, FigureError, FigureKind, FigurePayload,
    FigureSpec,
};
use sentiscope::matrix::FeatureMatrix;
use sentiscope::models::Task;

fn background(p: usize, n: usize) -> FeatureMatrix {
    let names: Vec<String> = (0..p).map(|j| format!("f{j}")).collect();
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|j| (0..n).map(|i| ((i * (j + 3)) % 11) as f64 / 10.0).collect())
        .collect();
    FeatureMatrix::from_columns(names, &cols).unwrap()
}

fn weighted(rows: &FeatureMatrix) -> Vec<f64> {
    rows.rows()
        .map(|r| {
            r.iter()
                .enumerate()
                .map(|(j, v)| (j as f64 - 4.5) * v)
                .sum::<f64>()
                + 3.0
        })
        .collect()
}

fn count_class(svg: &str, class: &str) -> usize {
    let doc = roxmltree::Document::parse(svg).expect("well-formed svg");
    doc.descendants()
        .filter(|n| n.attribute("class") == Some(class))
        .count()
}

fn all_specs() -> Vec<FigureSpec> {
    let bg = background(10, 40);
    let ex = make_explainer(&weighted, bg.clone()).unwrap();
    let instance = bg.row(3).to_vec();
    let report = breakdown(&ex, "row3", &instance, 1000).unwrap();
    let truths = weighted(&bg);
    let importance = permutation_importance(&ex, &bg, &truths, Loss::Rmse, 3, 9).unwrap();
    let profiles = ["f0", "f9"]
        .iter()
        .map(|f| ceteris_paribus(&ex, "row3", &instance, f, 11).unwrap())
        .collect();
    let hists = (0..3)
        .map(|j| histogram_values(&format!("f{j}"), &bg.column(j), 5).unwrap())
        .collect();
    let corr = CorrelationMatrix {
        labels: vec!["a".into(), "b".into()],
        values: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        constant_pairs: vec![("a".into(), "b".into())],
    };
    let bench = BenchmarkResult {
        task: Task::Classification,
        metric: "accuracy".into(),
        fold_count: 2,
        repeat_count: 2,
        algorithms: ["knn", "cart"]
            .iter()
            .map(|a| AlgorithmResult {
                algorithm: a.to_string(),
                values: (0..4)
                    .map(|i| ResampleValue {
                        repeat: i / 2,
                        fold: i % 2,
                        value: 0.5 + 0.01 * i as f64,
                    })
                    .collect(),
                mean: 0.515,
                sd: 0.0129,
            })
            .collect(),
        no_information_rate: Some(0.484),
    };
    vec![
        FigureSpec::new("Histograms", "t", FigurePayload::HistogramGrid(hists)),
        FigureSpec::new("Correlation", "t", FigurePayload::CorrelationHeatmap(corr)),
        FigureSpec::new("Benchmark", "t", FigurePayload::BenchmarkBox(bench)),
        FigureSpec::new("Importance", "t", FigurePayload::ImportanceBar(importance)),
        FigureSpec::new(
            "Break-down",
            "t",
            FigurePayload::BreakdownWaterfall(report.clone()),
        ),
        FigureSpec::new("Distributions", "t", FigurePayload::BreakdownViolin(report)),
        FigureSpec::new("What-if", "t", FigurePayload::CpProfile(profiles)),
    ]
}

#[test]
fn every_kind_is_well_formed_and_deterministic() {
    let specs = all_specs();
    let kinds: Vec<FigureKind> = specs.iter().map(FigureSpec::kind).collect();
    assert_eq!(kinds, FigureKind::ALL);
    for spec in &specs {
        let a = emit_figure(spec).unwrap();
        let b = emit_figure(&spec.clone()).unwrap();
        assert_eq!(a, b, "{:?}", spec.kind());
        roxmltree::Document::parse(&a).unwrap_or_else(|e| panic!("{:?}: {e}", spec.kind()));
        assert_eq!(emit_sidecar(spec).unwrap(), emit_sidecar(spec).unwrap());
    }
}

#[test]
fn waterfall_has_intercept_feature_bars_and_final_marker() {
    let spec = &all_specs()[4];
    let svg = emit_figure(spec).unwrap();
    assert_eq!(count_class(&svg, "bar"), 11);
    assert_eq!(count_class(&svg, "final-marker"), 1);
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let roles: Vec<&str> = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("bar"))
        .filter_map(|n| n.attribute("data-role"))
        .collect();
    assert_eq!(roles[0], "intercept");
    assert_eq!(roles.iter().filter(|r| **r == "contribution").count(), 10);
}

#[test]
fn violin_has_one_shape_per_step() {
    let spec = &all_specs()[5];
    let svg = emit_figure(spec).unwrap();
    assert_eq!(count_class(&svg, "violin"), 10);
    assert_eq!(count_class(&svg, "violin-baseline"), 1);
    let (csv, _) = emit_sidecar(spec).unwrap();
    let FigurePayload::BreakdownViolin(r) = &spec.payload else {
        unreachable!()
    };
    let samples = csv.lines().filter(|l| l.contains(",sample,")).count();
    let expected: usize =
        r.baseline_distribution.len() + r.steps.iter().map(|s| s.distribution.len()).sum::<usize>();
    assert_eq!(samples, expected);
}

#[test]
fn importance_bars_follow_report_order() {
    let spec = &all_specs()[3];
    let FigurePayload::ImportanceBar(r) = &spec.payload else {
        unreachable!()
    };
    let svg = emit_figure(spec).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    let keys: Vec<&str> = doc
        .descendants()
        .filter(|n| n.attribute("class") == Some("bar"))
        .filter_map(|n| n.attribute("data-key"))
        .collect();
    let expected: Vec<&str> = r.features.iter().map(|f| f.feature.as_str()).collect();
    assert_eq!(keys, expected);
}

#[test]
fn other_kinds_render_every_element() {
    let specs = all_specs();
    let svg = emit_figure(&specs[0]).unwrap();
    assert_eq!(count_class(&svg, "panel"), 3);
    assert_eq!(count_class(&svg, "bin"), 15);
    let svg = emit_figure(&specs[1]).unwrap();
    assert_eq!(count_class(&svg, "cell"), 4);
    assert!(svg.contains("data-constant=\"true\""));
    let svg = emit_figure(&specs[2]).unwrap();
    assert_eq!(count_class(&svg, "box"), 2);
    assert_eq!(count_class(&svg, "reference"), 1);
    let svg = emit_figure(&specs[6]).unwrap();
    assert_eq!(count_class(&svg, "profile"), 2);
    assert_eq!(count_class(&svg, "anchor"), 2);
}

#[test]
fn csv_sidecar_round_trips_bit_exactly() {
    for spec in all_specs() {
        let (csv, json) = emit_sidecar(&spec).unwrap();
        let mut reader = csv::Reader::from_reader(csv.as_bytes());
        let parsed: Vec<f64> = reader
            .records()
            .map(|r| r.unwrap()[3].parse::<f64>().unwrap())
            .collect();
        let expected: Vec<f64> = sidecar_rows(&spec.payload)
            .iter()
            .map(|r| r.value)
            .collect();
        assert_eq!(parsed.len(), expected.len());
        assert!(parsed
            .iter()
            .zip(&expected)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        let back: FigureSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
}

#[test]
fn waterfall_sidecar_lists_intercept_contributions_and_final() {
    let spec = &all_specs()[4];
    let rows = sidecar_rows(&spec.payload);
    assert_eq!(
        rows.iter().filter(|r| r.field == "contribution").count(),
        10
    );
    assert_eq!(rows.first().unwrap().series, "intercept");
    assert_eq!(rows.last().unwrap().series, "prediction");
}

#[test]
fn empty_payloads_are_rejected() {
    let spec = FigureSpec::new("x", "x", FigurePayload::HistogramGrid(vec![]));
    assert!(matches!(emit_figure(&spec), Err(FigureError::Empty(_))));
    assert!(matches!(emit_sidecar(&spec), Err(FigureError::Empty(_))));
    let spec = FigureSpec::new("x", "x", FigurePayload::CpProfile(vec![]));
    assert!(emit_figure(&spec).is_err());
    let spec = all_specs().remove(0).with_size(0, 100);
    assert!(matches!(
        emit_figure(&spec),
        Err(FigureError::Dimensions { .. })
    ));
}

#[test]
fn writes_three_files_per_figure() {
    let dir = tempfile::tempdir().unwrap();
    let spec = &all_specs()[4];
    let paths = write_figure(dir.path(), spec).unwrap();
    let names: Vec<String> = paths
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(
        names,
        [
            "breakdown_waterfall_t.svg",
            "breakdown_waterfall_t.csv",
            "breakdown_waterfall_t.json"
        ]
    );
}
