//! Model-agnostic explanations over a scalar score function: permutation
//! importance, break-down attributions and ceteris-paribus profiles.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{FeatureMatrix, MatrixError};
use crate::models::{ModelError, TrainedModel};
use crate::seed::{derive_seed, rng_for};
use crate::stats::mean;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("background set is empty")]
    EmptyBackground,
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("{truths} truths for {rows} evaluation rows")]
    TruthLength { rows: usize, truths: usize },
    #[error("permutation count must be at least 1")]
    PermutationCount,
    #[error("permutation of length {found} for {expected} rows")]
    PermutationLength { found: usize, expected: usize },
    #[error("expected {expected} feature values, found {found}")]
    InstanceLength { expected: usize, found: usize },
    #[error("feature names {found:?} do not match explainer features {expected:?}")]
    Schema {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("unknown feature: {0}")]
    UnknownFeature(String),
    #[error("grid size must be at least 2, got {0}")]
    GridSize(usize),
    #[error("score function returned {found} values for {expected} rows")]
    ScoreLength { expected: usize, found: usize },
    #[error("cannot average: {0}")]
    Average(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

pub type Result<T> = std::result::Result<T, ExplainError>;

/// Anything that maps a row table to one real score per row.
pub trait Scorer: Sync {
    fn score(&self, rows: &FeatureMatrix) -> Result<Vec<f64>>;
}

impl<F> Scorer for F
where
    F: Fn(&FeatureMatrix) -> Vec<f64> + Sync,
{
    fn score(&self, rows: &FeatureMatrix) -> Result<Vec<f64>> {
        Ok(self(rows))
    }
}

impl Scorer for TrainedModel {
    fn score(&self, rows: &FeatureMatrix) -> Result<Vec<f64>> {
        Ok(self.predict_scores(rows)?)
    }
}

pub struct Explainer<'a, S: Scorer + ?Sized> {
    scorer: &'a S,
    background: FeatureMatrix,
    baseline: f64,
}

/// Scores the background once and stores its mean as the baseline.
pub fn make_explainer<S: Scorer + ?Sized>(
    scorer: &S,
    background: FeatureMatrix,
) -> Result<Explainer<'_, S>> {
    if background.n_rows() == 0 {
        return Err(ExplainError::EmptyBackground);
    }
    let ex = Explainer {
        scorer,
        background,
        baseline: 0.0,
    };
    let baseline = mean(&ex.score(&ex.background)?);
    Ok(Explainer { baseline, ..ex })
}

impl<S: Scorer + ?Sized> Explainer<'_, S> {
    pub fn baseline(&self) -> f64 {
        self.baseline
    }

    pub fn background(&self) -> &FeatureMatrix {
        &self.background
    }

    pub fn feature_names(&self) -> &[String] {
        self.background.names()
    }

    fn score(&self, rows: &FeatureMatrix) -> Result<Vec<f64>> {
        let out = self.scorer.score(rows)?;
        if out.len() != rows.n_rows() {
            return Err(ExplainError::ScoreLength {
                expected: rows.n_rows(),
                found: out.len(),
            });
        }
        Ok(out)
    }

    fn check_instance(&self, instance: &[f64]) -> Result<()> {
        if instance.len() != self.background.n_cols() {
            return Err(ExplainError::InstanceLength {
                expected: self.background.n_cols(),
                found: instance.len(),
            });
        }
        Ok(())
    }

    fn check_schema(&self, rows: &FeatureMatrix) -> Result<()> {
        if rows.names() != self.feature_names() {
            return Err(ExplainError::Schema {
                expected: self.feature_names().to_vec(),
                found: rows.names().to_vec(),
            });
        }
        Ok(())
    }

    fn feature_index(&self, feature: &str) -> Result<usize> {
        self.background
            .column_index(feature)
            .ok_or_else(|| ExplainError::UnknownFeature(feature.to_string()))
    }

    /// Score of the instance alone.
    pub fn predict_instance(&self, instance: &[f64]) -> Result<f64> {
        self.check_instance(instance)?;
        Ok(self.score(&self.background.single_row(instance)?)?[0])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Rmse,
    /// Share of rows whose rounded score differs from the truth.
    OneMinusAccuracy,
}

impl Loss {
    pub fn as_str(self) -> &'static str {
        match self {
            Loss::Rmse => "rmse",
            Loss::OneMinusAccuracy => "one_minus_accuracy",
        }
    }

    pub fn evaluate(self, scores: &[f64], truths: &[f64]) -> f64 {
        let n = scores.len() as f64;
        match self {
            Loss::Rmse => {
                let sse: f64 = scores
                    .iter()
                    .zip(truths)
                    .map(|(s, t)| (s - t) * (s - t))
                    .sum();
                (sse / n).sqrt()
            }
            Loss::OneMinusAccuracy => {
                let misses = scores
                    .iter()
                    .zip(truths)
                    .filter(|(s, t)| s.round() != **t)
                    .count();
                misses as f64 / n
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub permuted_losses: Vec<f64>,
    pub mean_permuted_loss: f64,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub loss: Loss,
    pub baseline_loss: f64,
    pub permutation_count: usize,
    pub seed: u64,
    /// Sorted by descending importance, ties in feature order.
    pub features: Vec<FeatureImportance>,
}

impl ImportanceReport {
    pub fn get(&self, feature: &str) -> Option<&FeatureImportance> {
        self.features.iter().find(|f| f.feature == feature)
    }

    /// The `n` most important feature names.
    pub fn top(&self, n: usize) -> Vec<String> {
        self.features
            .iter()
            .take(n)
            .map(|f| f.feature.clone())
            .collect()
    }

    /// Long format: `feature,field,index,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,field,index,value\n");
        out.push_str(&format!(",baseline_loss,,{}\n", self.baseline_loss));
        for f in &self.features {
            for (b, loss) in f.permuted_losses.iter().enumerate() {
                out.push_str(&format!("{},permuted_loss,{b},{loss}\n", f.feature));
            }
            out.push_str(&format!(
                "{},mean_permuted_loss,,{}\n",
                f.feature, f.mean_permuted_loss
            ));
            out.push_str(&format!("{},importance,,{}\n", f.feature, f.importance));
        }
        out
    }
}

fn importance_from_permutations<S, P>(
    ex: &Explainer<'_, S>,
    eval: &FeatureMatrix,
    truths: &[f64],
    loss: Loss,
    permutation_count: usize,
    seed: u64,
    permutation: P,
) -> Result<ImportanceReport>
where
    S: Scorer + ?Sized,
    P: Fn(usize, usize) -> Vec<usize> + Sync,
{
    ex.check_schema(eval)?;
    if eval.n_rows() == 0 {
        return Err(ExplainError::EmptyEvalSet);
    }
    if truths.len() != eval.n_rows() {
        return Err(ExplainError::TruthLength {
            rows: eval.n_rows(),
            truths: truths.len(),
        });
    }
    if permutation_count == 0 {
        return Err(ExplainError::PermutationCount);
    }
    let baseline_loss = loss.evaluate(&ex.score(eval)?, truths);
    let mut features = (0..eval.n_cols())
        .into_par_iter()
        .map(|j| {
            let original = eval.column(j);
            let mut permuted = eval.clone();
            let mut losses = Vec::with_capacity(permutation_count);
            for b in 0..permutation_count {
                let order = permutation(j, b);
                if order.len() != original.len() {
                    return Err(ExplainError::PermutationLength {
                        found: order.len(),
                        expected: original.len(),
                    });
                }
                for (i, &src) in order.iter().enumerate() {
                    permuted.set(i, j, original[src]);
                }
                losses.push(loss.evaluate(&ex.score(&permuted)?, truths));
            }
            // differences first, so an unchanged loss gives exactly 0
            let diffs: Vec<f64> = losses.iter().map(|l| l - baseline_loss).collect();
            Ok(FeatureImportance {
                feature: eval.names()[j].clone(),
                mean_permuted_loss: mean(&losses),
                importance: mean(&diffs),
                permuted_losses: losses,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    features.sort_by(|a, b| b.importance.total_cmp(&a.importance));
    Ok(ImportanceReport {
        loss,
        baseline_loss,
        permutation_count,
        seed,
        features,
    })
}

/// Increase in loss when each feature column is shuffled, averaged over
/// `permutation_count` shuffles. Shuffle `b` of feature `j` draws from a
/// stream derived from `(seed, j, b)`.
pub fn permutation_importance<S: Scorer + ?Sized>(
    ex: &Explainer<'_, S>,
    eval: &FeatureMatrix,
    truths: &[f64],
    loss: Loss,
    permutation_count: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    let n = eval.n_rows();
    importance_from_permutations(ex, eval, truths, loss, permutation_count, seed, |j, b| {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng_for(derive_seed(seed, j as u64), b as u64));
        order
    })
}

/// As [`permutation_importance`], with every feature run through the given
/// row permutations (`permuted[i] = original[order[i]]`).
pub fn permutation_importance_with<S: Scorer + ?Sized>(
    ex: &Explainer<'_, S>,
    eval: &FeatureMatrix,
    truths: &[f64],
    loss: Loss,
    permutations: &[Vec<usize>],
) -> Result<ImportanceReport> {
    importance_from_permutations(ex, eval, truths, loss, permutations.len(), 0, |_, b| {
        permutations[b].clone()
    })
}

/// Change in mean background score when one feature is set to the
/// instance's value everywhere.
pub fn single_feature_deltas<S: Scorer + ?Sized>(
    ex: &Explainer<'_, S>,
    instance: &[f64],
) -> Result<Vec<f64>> {
    ex.check_instance(instance)?;
    (0..instance.len())
        .map(|j| {
            let mut bg = ex.background.clone();
            bg.fill_column(j, instance[j]);
            Ok(mean(&ex.score(&bg)?) - ex.baseline)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownStep {
    pub feature: String,
    pub value: f64,
    pub contribution: f64,
    pub cumulative: f64,
    pub distribution: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownReport {
    pub instance_id: String,
    pub intercept: f64,
    /// Background scores before any feature is fixed.
    pub baseline_distribution: Vec<f64>,
    pub steps: Vec<BreakdownStep>,
    pub final_prediction: f64,
}

impl BreakdownReport {
    pub fn get(&self, feature: &str) -> Option<&BreakdownStep> {
        self.steps.iter().find(|s| s.feature == feature)
    }

    /// Long format: `instance,position,feature,value,contribution,cumulative`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance,position,feature,value,contribution,cumulative\n");
        self.write_csv_rows(&mut out);
        out
    }

    fn write_csv_rows(&self, out: &mut String) {
        let id = &self.instance_id;
        out.push_str(&format!("{id},0,intercept,,,{}\n", self.intercept));
        for (k, s) in self.steps.iter().enumerate() {
            out.push_str(&format!(
                "{id},{},{},{},{},{}\n",
                k + 1,
                s.feature,
                s.value,
                s.contribution,
                s.cumulative
            ));
        }
        out.push_str(&format!(
            "{id},{},prediction,,,{}\n",
            self.steps.len() + 1,
            self.final_prediction
        ));
    }
}

/// Several reports in one CSV table.
pub fn breakdowns_to_csv(reports: &[BreakdownReport]) -> String {
    let mut out = String::from("instance,position,feature,value,contribution,cumulative\n");
    for r in reports {
        r.write_csv_rows(&mut out);
    }
    out
}

/// At most `cap` values at evenly spaced positions.
fn cap_sample(values: Vec<f64>, cap: usize) -> Vec<f64> {
    let n = values.len();
    if n <= cap {
        return values;
    }
    (0..cap).map(|i| values[i * n / cap]).collect()
}

/// Sequential attribution: features are fixed to the instance's values one
/// at a time, in descending order of their single-feature |Δ|, and each
/// step's contribution is the change in mean background score.
pub fn breakdown<S: Scorer + ?Sized>(
    ex: &Explainer<'_, S>,
    instance_id: &str,
    instance: &[f64],
    max_distribution_sample: usize,
) -> Result<BreakdownReport> {
    let deltas = single_feature_deltas(ex, instance)?;
    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by(|&a, &b| deltas[b].abs().total_cmp(&deltas[a].abs()));
    breakdown_in_order(ex, instance_id, instance, &order, max_distribution_sample)
}

/// Break-down with a caller-chosen feature order.
pub fn breakdown_in_order<S: Scorer + ?Sized>(
    ex: &Explainer<'_, S>,
    instance_id: &str,
    instance: &[f64],
    order: &[usize],
    max_distribution_sample: usize,
) -> Result<BreakdownReport> {
    ex.check_instance(instance)?;
    let mut bg = ex.background.clone();
    let mut previous = ex.baseline;
    let mut steps = Vec::with_capacity(order.len());
    for &j in order {
        bg.fill_column(j, instance[j]);
        let scores = ex.score(&bg)?;
        let cumulative = mean(&scores);
        steps.push(BreakdownStep {
            feature: ex.feature_names()[j].clone(),
            value: instance[j],
            contribution: cumulative - previous,
            cumulative,
            distribution: cap_sample(scores, max_distribution_sample),
        });
        previous = cumulative;
    }
    let baseline_scores = ex.score(&ex.background)?;
    Ok(BreakdownReport {
        instance_id: instance_id.to_string(),
        intercept: ex.baseline,
        baseline_distribution: cap_sample(baseline_scores, max_distribution_sample),
        steps,
        final_prediction: ex.predict_instance(instance)?,
    })
}

/// Averages reports that share an explainer, aligning steps by feature
/// name. Steps are reordered by descending |averaged contribution|, ties
/// by name.
pub fn average_breakdowns(
    reports: &[BreakdownReport],
    instance_id: &str,
    max_distribution_sample: usize,
) -> Result<BreakdownReport> {
    let first = reports
        .first()
        .ok_or_else(|| ExplainError::Average("no reports".into()))?;
    let mut features: Vec<&str> = first.steps.iter().map(|s| s.feature.as_str()).collect();
    features.sort_unstable();
    for r in &reports[1..] {
        if r.intercept != first.intercept {
            return Err(ExplainError::Average(format!(
                "intercepts {} and {} differ",
                first.intercept, r.intercept
            )));
        }
        let mut other: Vec<&str> = r.steps.iter().map(|s| s.feature.as_str()).collect();
        other.sort_unstable();
        if other != features {
            return Err(ExplainError::Average(format!(
                "feature sets {features:?} and {other:?} differ"
            )));
        }
    }
    let n = reports.len() as f64;
    let mut pooled: BTreeMap<&str, (f64, f64, Vec<f64>)> = BTreeMap::new();
    for r in reports {
        for s in &r.steps {
            let e = pooled.entry(s.feature.as_str()).or_default();
            e.0 += s.contribution;
            e.1 += s.value;
            e.2.extend_from_slice(&s.distribution);
        }
    }
    let mut averaged: Vec<(&str, f64, f64, Vec<f64>)> = pooled
        .into_iter()
        .map(|(f, (c, v, d))| (f, c / n, v / n, d))
        .collect();
    averaged.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
    let mut cumulative = first.intercept;
    let steps = averaged
        .into_iter()
        .map(|(feature, contribution, value, distribution)| {
            cumulative += contribution;
            BreakdownStep {
                feature: feature.to_string(),
                value,
                contribution,
                cumulative,
                distribution: cap_sample(distribution, max_distribution_sample),
            }
        })
        .collect();
    Ok(BreakdownReport {
        instance_id: instance_id.to_string(),
        intercept: first.intercept,
        baseline_distribution: first.baseline_distribution.clone(),
        steps,
        final_prediction: reports.iter().map(|r| r.final_prediction).sum::<f64>() / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub value: f64,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CPProfile {
    pub instance_id: String,
    pub feature: String,
    pub grid: Vec<f64>,
    pub predictions: Vec<f64>,
    /// The instance's own point; absent on group averages.
    pub anchor: Option<Anchor>,
}

impl CPProfile {
    /// Long format: `instance,feature,grid_value,prediction`.
    pub fn to_csv(&self) -> String {
        profiles_to_csv(std::slice::from_ref(self))
    }
}

pub fn profiles_to_csv(profiles: &[CPProfile]) -> String {
    let mut out = String::from("instance,feature,grid_value,prediction\n");
    for p in profiles {
        for (g, y) in p.grid.iter().zip(&p.predictions) {
            out.push_str(&format!("{},{},{g},{y}\n", p.instance_id, p.feature));
        }
    }
    out
}

fn sorted_distinct(mut values: Vec<f64>) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    values.dedup();
    values
}

/// `grid_size` evenly spaced points over the background range of `feature`,
/// plus `extra` values, sorted and distinct.
pub fn feature_grid<S: Scorer + ?Sized>(
    ex: &Explainer<'_, S>,
    feature: &str,
    grid_size: usize,
    extra: &[f64],
) -> Result<Vec<f64>> {
    let j = ex.feature_index(feature)?;
    if grid_size < 2 {
        return Err(ExplainError::GridSize(grid_size));
    }
    let col = ex.background.column(j);
    let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let step = (hi - lo) / (grid_size - 1) as f64;
    let mut grid: Vec<f64> = (0..grid_size)
        .map(|i| {
            if i + 1 == grid_size {
                hi
            } else {
                lo + step * i as f64
            }
        })
        .collect();
    grid.extend_from_slice(extra);
    Ok(sorted_distinct(grid))
}

/// Scores the instance with `feature` swept over `grid`; the instance's
/// own value is added to the grid if missing.
pub fn ceteris_paribus_on_grid<S: Scorer + ?Sized>(
    ex: &Explainer<'_, S>,
    instance_id: &str,
    instance: &[f64],
    feature: &str,
    grid: &[f64],
) -> Result<CPProfile> {
    ex.check_instance(instance)?;
    let j = ex.feature_index(feature)?;
    let mut values = grid.to_vec();
    values.push(instance[j]);
    let grid = sorted_distinct(values);
    let mut rows = FeatureMatrix::repeat_row(ex.feature_names().to_vec(), instance, grid.len())?;
    for (i, &g) in grid.iter().enumerate() {
        rows.set(i, j, g);
    }
    let predictions = ex.score(&rows)?;
    let at = grid
        .iter()
        .position(|&g| g == instance[j])
        .expect("instance value was inserted into the grid");
    Ok(CPProfile {
        instance_id: instance_id.to_string(),
        feature: feature.to_string(),
        anchor: Some(Anchor {
            value: instance[j],
            prediction: predictions[at],
        }),
        grid,
        predictions,
    })
}

/// What-if profile over `grid_size` evenly spaced background values.
pub fn ceteris_paribus<S: Scorer + ?Sized>(
    ex: &Explainer<'_, S>,
    instance_id: &str,
    instance: &[f64],
    feature: &str,
    grid_size: usize,
) -> Result<CPProfile> {
    ex.check_instance(instance)?;
    let grid = feature_grid(ex, feature, grid_size, &[])?;
    ceteris_paribus_on_grid(ex, instance_id, instance, feature, &grid)
}

/// Profiles for a group of instances on one shared grid (the even grid
/// plus every instance's own value).
pub fn group_profiles<S: Scorer + ?Sized>(
    ex: &Explainer<'_, S>,
    instances: &[(String, Vec<f64>)],
    feature: &str,
    grid_size: usize,
) -> Result<Vec<CPProfile>> {
    let j = ex.feature_index(feature)?;
    let own: Vec<f64> = instances
        .iter()
        .map(|(_, v)| v.get(j).copied().unwrap_or(0.0))
        .collect();
    let grid = feature_grid(ex, feature, grid_size, &own)?;
    instances
        .iter()
        .map(|(id, values)| ceteris_paribus_on_grid(ex, id, values, feature, &grid))
        .collect()
}

/// Pointwise mean of profiles that share a feature and grid.
pub fn average_profiles(profiles: &[CPProfile], instance_id: &str) -> Result<CPProfile> {
    let first = profiles
        .first()
        .ok_or_else(|| ExplainError::Average("no profiles".into()))?;
    if let Some(p) = profiles
        .iter()
        .find(|p| p.feature != first.feature || p.grid != first.grid)
    {
        return Err(ExplainError::Average(format!(
            "profile of {} for {} does not share the grid of {}",
            p.feature, p.instance_id, first.instance_id
        )));
    }
    let n = profiles.len() as f64;
    let predictions = (0..first.grid.len())
        .map(|i| profiles.iter().map(|p| p.predictions[i]).sum::<f64>() / n)
        .collect();
    Ok(CPProfile {
        instance_id: instance_id.to_string(),
        feature: first.feature.clone(),
        grid: first.grid.clone(),
        predictions,
        anchor: None,
    })
}
