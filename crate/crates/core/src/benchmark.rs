//! Repeated k-fold benchmarking of model specs with RMSE (regression) or
//! accuracy (classification), plus the no-information rate.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::FeatureMatrix;
use crate::models::{self, ModelError, ModelSpec, Predictions, Target, Task};
use crate::seed::{derive_seed, rng_for};
use crate::stats::{mean, sample_sd};

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("invalid resampling plan: {0}")]
    Plan(String),
    #[error("metric inputs: {0}")]
    Metric(String),
    #[error("benchmark needs at least one model spec")]
    NoSpecs,
    #[error("all specs must share one task")]
    MixedTasks,
    #[error("plan covers {plan} rows but data has {data}")]
    PlanSize { plan: usize, data: usize },
    #[error("{algorithm} failed on repeat {repeat}, fold {fold}: {source}")]
    Resample {
        algorithm: String,
        repeat: usize,
        fold: usize,
        #[source]
        source: ModelError,
    },
}

pub type Result<T> = std::result::Result<T, BenchmarkError>;

/// Row-to-fold assignments for each repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplingPlan {
    pub fold_count: usize,
    pub repeat_count: usize,
    pub seed: u64,
    /// `assignments[repeat][row]` is the row's fold.
    pub assignments: Vec<Vec<usize>>,
}

impl ResamplingPlan {
    pub fn row_count(&self) -> usize {
        self.assignments.first().map_or(0, Vec::len)
    }

    /// `(train, test)` row indices for one resample, in row order.
    pub fn split(&self, repeat: usize, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let a = &self.assignments[repeat];
        let (test, train): (Vec<usize>, Vec<usize>) = (0..a.len()).partition(|&i| a[i] == fold);
        (train, test)
    }
}

/// Shuffles rows per repeat and deals them round-robin into `k` folds.
pub fn make_plan(row_count: usize, k: usize, r: usize, seed: u64) -> Result<ResamplingPlan> {
    if k < 2 {
        return Err(BenchmarkError::Plan(format!("fold count {k} < 2")));
    }
    if r < 1 {
        return Err(BenchmarkError::Plan(
            "repeat count must be at least 1".into(),
        ));
    }
    if row_count < k {
        return Err(BenchmarkError::Plan(format!(
            "{row_count} rows cannot fill {k} folds"
        )));
    }
    let assignments = (0..r)
        .map(|rep| {
            let mut order: Vec<usize> = (0..row_count).collect();
            order.shuffle(&mut rng_for(seed, rep as u64));
            let mut folds = vec![0; row_count];
            for (pos, &row) in order.iter().enumerate() {
                folds[row] = pos % k;
            }
            folds
        })
        .collect();
    Ok(ResamplingPlan {
        fold_count: k,
        repeat_count: r,
        seed,
        assignments,
    })
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(BenchmarkError::Metric(format!(
            "length mismatch: {a} vs {b}"
        )));
    }
    if a == 0 {
        return Err(BenchmarkError::Metric("empty input".into()));
    }
    Ok(())
}

pub fn rmse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    check_lengths(predictions.len(), truths.len())?;
    let mse = predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / predictions.len() as f64;
    Ok(mse.sqrt())
}

pub fn accuracy<S: AsRef<str>, T: AsRef<str>>(predicted: &[S], truths: &[T]) -> Result<f64> {
    check_lengths(predicted.len(), truths.len())?;
    let hits = predicted
        .iter()
        .zip(truths)
        .filter(|(p, t)| p.as_ref() == t.as_ref())
        .count();
    Ok(hits as f64 / predicted.len() as f64)
}

/// Accuracy of always predicting the most frequent level.
pub fn no_information_rate<S: AsRef<str>>(truths: &[S]) -> Result<f64> {
    if truths.is_empty() {
        return Err(BenchmarkError::Metric("empty input".into()));
    }
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in truths {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    let max = counts.values().copied().max().unwrap_or(0);
    Ok(max as f64 / truths.len() as f64)
}

/// Most frequent level; ties go to the lexicographically smallest.
pub fn majority_level<S: AsRef<str>>(truths: &[S]) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in truths {
        *counts.entry(t.as_ref()).or_default() += 1;
    }
    let mut best: Option<(&str, usize)> = None;
    for (level, count) in counts {
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((level, count));
        }
    }
    best.map(|(l, _)| l.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleValue {
    pub repeat: usize,
    pub fold: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmResult {
    pub algorithm: String,
    pub values: Vec<ResampleValue>,
    pub mean: f64,
    pub sd: f64,
}

impl AlgorithmResult {
    fn from_values(algorithm: String, mut values: Vec<ResampleValue>) -> Self {
        values.sort_by_key(|v| (v.repeat, v.fold));
        let raw: Vec<f64> = values.iter().map(|v| v.value).collect();
        AlgorithmResult {
            algorithm,
            mean: mean(&raw),
            sd: sample_sd(&raw),
            values,
        }
    }

    pub fn raw_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.value).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub task: Task,
    /// `rmse` or `accuracy`.
    pub metric: String,
    pub fold_count: usize,
    pub repeat_count: usize,
    pub algorithms: Vec<AlgorithmResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub no_information_rate: Option<f64>,
}

impl BenchmarkResult {
    pub fn get(&self, algorithm: &str) -> Option<&AlgorithmResult> {
        self.algorithms.iter().find(|a| a.algorithm == algorithm)
    }

    /// Long format: `algorithm,repeat,fold,metric,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("algorithm,repeat,fold,metric,value\n");
        for a in &self.algorithms {
            for v in &a.values {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    a.algorithm, v.repeat, v.fold, self.metric, v.value
                ));
            }
        }
        out
    }
}

fn evaluate(
    spec: &ModelSpec,
    features: &FeatureMatrix,
    target: &Target,
    plan: &ResamplingPlan,
    repeat: usize,
    fold: usize,
) -> std::result::Result<f64, ModelError> {
    let (train, test) = plan.split(repeat, fold);
    let resample = (repeat * plan.fold_count + fold) as u64;
    let mut spec = *spec;
    spec.seed = derive_seed(derive_seed(plan.seed, spec.seed), resample);
    let model = models::fit(&spec, &features.select_rows(&train), &target.select(&train))?;
    let predictions = model.predict(&features.select_rows(&test))?;
    let value = match (predictions, target.select(&test)) {
        (Predictions::Regression(p), Target::Regression(t)) => rmse(&p, &t),
        (p @ Predictions::Classification { .. }, Target::Classification(t)) => {
            accuracy(&p.predicted_levels(), &t)
        }
        _ => unreachable!("fit checks that task and target agree"),
    };
    Ok(value.expect("folds are non-empty and aligned"))
}

/// Trains and scores every spec on every `(repeat, fold)` resample. Any
/// failing resample aborts the whole benchmark.
pub fn run_benchmark(
    specs: &[ModelSpec],
    features: &FeatureMatrix,
    target: &Target,
    plan: &ResamplingPlan,
) -> Result<BenchmarkResult> {
    let task = specs.first().ok_or(BenchmarkError::NoSpecs)?.task;
    if specs.iter().any(|s| s.task != task) {
        return Err(BenchmarkError::MixedTasks);
    }
    if plan.row_count() != features.n_rows() {
        return Err(BenchmarkError::PlanSize {
            plan: plan.row_count(),
            data: features.n_rows(),
        });
    }
    let resamples: Vec<(usize, usize)> = (0..plan.repeat_count)
        .flat_map(|r| (0..plan.fold_count).map(move |f| (r, f)))
        .collect();
    let mut algorithms = Vec::with_capacity(specs.len());
    for spec in specs {
        let values = resamples
            .par_iter()
            .map(|&(repeat, fold)| {
                evaluate(spec, features, target, plan, repeat, fold)
                    .map(|value| ResampleValue {
                        repeat,
                        fold,
                        value,
                    })
                    .map_err(|source| BenchmarkError::Resample {
                        algorithm: spec.algorithm().to_string(),
                        repeat,
                        fold,
                        source,
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        log::info!(
            "benchmarked {} ({} resamples)",
            spec.algorithm(),
            values.len()
        );
        algorithms.push(AlgorithmResult::from_values(
            spec.algorithm().to_string(),
            values,
        ));
    }
    let (metric, nir) = match target {
        Target::Regression(_) => ("rmse", None),
        Target::Classification(t) => ("accuracy", Some(no_information_rate(t)?)),
    };
    Ok(BenchmarkResult {
        task,
        metric: metric.to_string(),
        fold_count: plan.fold_count,
        repeat_count: plan.repeat_count,
        algorithms,
        no_information_rate: nir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Algorithm, Hyperparameters, KnnParams};
    use proptest::prelude::*;

    #[test]
    fn plan_examples() {
        let p = make_plan(10, 5, 1, 3).unwrap();
        for f in 0..5 {
            assert_eq!(p.split(0, f).1.len(), 2);
        }
        let p = make_plan(11, 5, 1, 3).unwrap();
        let mut sizes: Vec<usize> = (0..5).map(|f| p.split(0, f).1.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 2, 2, 3]);
        assert_eq!(
            make_plan(11, 5, 2, 3).unwrap(),
            make_plan(11, 5, 2, 3).unwrap()
        );
        assert!(make_plan(10, 1, 1, 0).is_err());
        assert!(make_plan(10, 2, 0, 0).is_err());
        assert!(make_plan(3, 4, 1, 0).is_err());
    }

    #[test]
    fn metric_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[1.0, 2.0], &[2.0, 4.0]).unwrap(), 2.5f64.sqrt());
        assert!((rmse(&[1.0, 2.0], &[2.0, 4.0]).unwrap() - 1.58114).abs() < 1e-5);
        assert!(rmse(&[1.0], &[]).is_err());
        assert!(rmse(&[], &[]).is_err());
        assert_eq!(accuracy(&["1", "2"], &["1", "2"]).unwrap(), 1.0);
        assert_eq!(accuracy(&["1", "2"], &["1", "3"]).unwrap(), 0.5);
        assert_eq!(accuracy(&["1"], &["2"]).unwrap(), 0.0);
        assert!(accuracy(&["1"], &["2", "3"]).is_err());
        assert_eq!(no_information_rate(&["a", "a", "a"]).unwrap(), 1.0);
        assert_eq!(no_information_rate(&["a", "b"]).unwrap(), 0.5);
        assert!(no_information_rate::<&str>(&[]).is_err());
    }

    #[test]
    fn nir_of_484_majority() {
        let mut labels = vec!["5"; 484];
        labels.extend(vec!["4"; 300]);
        labels.extend(vec!["1"; 216]);
        assert_eq!(no_information_rate(&labels).unwrap(), 0.484);
        let majority = majority_level(&labels).unwrap();
        let constant = vec![majority; labels.len()];
        assert_eq!(accuracy(&constant, &labels).unwrap(), 0.484);
    }

    #[test]
    fn two_fold_benchmark_aggregates() {
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v * 0.5).collect();
        let features = FeatureMatrix::from_columns(vec!["x".into()], &[x]).unwrap();
        let spec = ModelSpec::new(
            Task::Regression,
            Hyperparameters::Knn(KnnParams {
                k: 2,
                standardize: true,
            }),
            0,
        );
        let plan = make_plan(20, 2, 1, 5).unwrap();
        let res = run_benchmark(&[spec], &features, &Target::Regression(y), &plan).unwrap();
        let a = res.get("knn").unwrap();
        assert_eq!(a.values.len(), 2);
        assert_eq!(a.mean, (a.values[0].value + a.values[1].value) / 2.0);
        assert_eq!(res.no_information_rate, None);
        assert!(res
            .to_csv()
            .starts_with("algorithm,repeat,fold,metric,value\nknn,0,0,rmse,"));
    }

    #[test]
    fn mixed_tasks_and_plan_mismatch_are_rejected() {
        let features = FeatureMatrix::from_columns(vec!["x".into()], &[vec![0.0; 10]]).unwrap();
        let plan = make_plan(10, 2, 1, 0).unwrap();
        let specs = [
            ModelSpec::with_defaults(Algorithm::Knn, Task::Regression, 0),
            ModelSpec::with_defaults(Algorithm::Knn, Task::Classification, 0),
        ];
        assert!(matches!(
            run_benchmark(&specs, &features, &Target::Regression(vec![0.0; 10]), &plan),
            Err(BenchmarkError::MixedTasks)
        ));
        let small = make_plan(8, 2, 1, 0).unwrap();
        assert!(matches!(
            run_benchmark(
                &specs[..1],
                &features,
                &Target::Regression(vec![0.0; 10]),
                &small
            ),
            Err(BenchmarkError::PlanSize { .. })
        ));
    }

    #[test]
    fn failing_resample_aborts_with_context() {
        // every training fold is single-level, so classification fit fails
        let features = FeatureMatrix::from_columns(vec!["x".into()], &[vec![0.0; 4]]).unwrap();
        let labels = vec!["a".to_string(), "a".into(), "a".into(), "a".into()];
        let plan = make_plan(4, 2, 1, 0).unwrap();
        let spec = ModelSpec::with_defaults(Algorithm::Cart, Task::Classification, 0);
        let err =
            run_benchmark(&[spec], &features, &Target::Classification(labels), &plan).unwrap_err();
        assert!(
            matches!(err, BenchmarkError::Resample { repeat: 0, .. }),
            "{err}"
        );
    }

    proptest! {
        #[test]
        fn plan_covers_every_row_once(rows in 2usize..300, k in 2usize..10, r in 1usize..4, seed in any::<u64>()) {
            prop_assume!(rows >= k);
            let plan = make_plan(rows, k, r, seed).unwrap();
            for rep in 0..r {
                let mut seen = vec![0usize; rows];
                let mut sizes = Vec::new();
                for f in 0..k {
                    let (train, test) = plan.split(rep, f);
                    prop_assert_eq!(train.len() + test.len(), rows);
                    prop_assert!(!test.is_empty());
                    sizes.push(test.len());
                    for i in test { seen[i] += 1; }
                }
                prop_assert!(seen.iter().all(|&s| s == 1));
                prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            }
        }

        #[test]
        fn rmse_translation_invariant(
            pairs in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..50),
            c in -100.0f64..100.0,
        ) {
            let (p, t): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let shifted_p: Vec<f64> = p.iter().map(|v| v + c).collect();
            let shifted_t: Vec<f64> = t.iter().map(|v| v + c).collect();
            let a = rmse(&p, &t).unwrap();
            let b = rmse(&shifted_p, &shifted_t).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }

        #[test]
        fn majority_predictor_scores_nir(labels in prop::collection::vec(prop::sample::select(vec!["1", "2", "3", "4", "5"]), 1..200)) {
            let majority = majority_level(&labels).unwrap();
            let constant = vec![majority; labels.len()];
            prop_assert_eq!(accuracy(&constant, &labels).unwrap(), no_information_rate(&labels).unwrap());
        }
    }
}
