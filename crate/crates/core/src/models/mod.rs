//! From-scratch learners behind one fit/predict contract: k-nearest
//! neighbors, CART, random forest and gradient boosting, each for regression
//! and multi-class classification.

pub mod forest;
pub mod gbm;
pub mod knn;
pub mod tree;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::FeatureMatrix;
use crate::seed::derive_seed;
use gbm::{build_booster, Booster, BoostingConfig};
use knn::KnnModel;
use tree::{grow_tree, Labels, Tree, TreeRules};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training data is empty")]
    EmptyData,
    #[error("target has {found} values but features have {expected} rows")]
    TargetLength { found: usize, expected: usize },
    #[error("classification target needs at least 2 levels, found {0}")]
    SingleLevel(usize),
    #[error("illegal hyperparameter: {0}")]
    Hyperparameter(String),
    #[error("{task} model given a {target} target")]
    TaskMismatch { task: Task, target: &'static str },
    #[error("schema mismatch: model expects {expected:?}, got {found:?}")]
    Schema {
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("unknown algorithm {0:?} (expected knn, cart, random_forest or gbm)")]
    UnknownAlgorithm(String),
    #[error("unsupported model format version {0}")]
    FormatVersion(u32),
    #[error("model document: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Knn,
    Cart,
    RandomForest,
    Gbm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Knn,
        Algorithm::Cart,
        Algorithm::RandomForest,
        Algorithm::Gbm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Knn => "knn",
            Algorithm::Cart => "cart",
            Algorithm::RandomForest => "random_forest",
            Algorithm::Gbm => "gbm",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(Algorithm::Knn),
            "cart" | "rpart" => Ok(Algorithm::Cart),
            "random_forest" | "rf" => Ok(Algorithm::RandomForest),
            "gbm" => Ok(Algorithm::Gbm),
            other => Err(ModelError::UnknownAlgorithm(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Regression => "regression",
            Task::Classification => "classification",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            other => Err(format!("unknown task {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnParams {
    pub k: usize,
    pub standardize: bool,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            k: 5,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CartParams {
    pub min_split: usize,
    pub min_leaf: usize,
    pub max_depth: usize,
    pub cp: f64,
}

impl Default for CartParams {
    fn default() -> Self {
        CartParams {
            min_split: 20,
            min_leaf: 7,
            max_depth: 30,
            cp: 0.01,
        }
    }
}

impl CartParams {
    fn rules(&self) -> TreeRules {
        TreeRules {
            min_split: self.min_split,
            min_leaf: self.min_leaf,
            max_depth: self.max_depth,
            cp: self.cp,
            mtry: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestSampling {
    /// `n` draws with replacement per tree.
    #[default]
    Bootstrap,
    /// Every tree sees every row once.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub tree_count: usize,
    /// Features tried per split; `None` means `p/3` (regression) or `√p`
    /// (classification), at least 1.
    pub mtry: Option<usize>,
    /// Nodes with at most this many rows become leaves.
    pub min_node_size: usize,
    pub sampling: ForestSampling,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            tree_count: 500,
            mtry: None,
            min_node_size: 5,
            sampling: ForestSampling::Bootstrap,
        }
    }
}

impl ForestParams {
    pub fn effective_mtry(&self, task: Task, p: usize) -> usize {
        self.mtry
            .unwrap_or(match task {
                Task::Regression => p / 3,
                Task::Classification => (p as f64).sqrt().floor() as usize,
            })
            .clamp(1, p.max(1))
    }

    /// Tree-growing rules used for every tree of the forest: grown deep, no
    /// complexity pruning.
    pub fn tree_rules(&self, task: Task, p: usize) -> TreeRules {
        TreeRules {
            min_split: self.min_node_size + 1,
            min_leaf: 1,
            max_depth: usize::MAX,
            cp: 0.0,
            mtry: Some(self.effective_mtry(task, p)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmParams {
    pub tree_count: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    pub subsample: f64,
    pub min_leaf: usize,
}

impl Default for GbmParams {
    fn default() -> Self {
        GbmParams {
            tree_count: 100,
            max_depth: 3,
            shrinkage: 0.1,
            subsample: 0.5,
            min_leaf: 10,
        }
    }
}

impl GbmParams {
    fn boosting(&self) -> BoostingConfig {
        BoostingConfig {
            rounds: self.tree_count,
            shrinkage: self.shrinkage,
            subsample: self.subsample,
            rules: TreeRules {
                min_split: 2 * self.min_leaf.max(1),
                min_leaf: self.min_leaf.max(1),
                max_depth: self.max_depth,
                cp: 0.0,
                mtry: None,
            },
        }
    }
}

/// Per-algorithm hyperparameters; the variant selects the algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    tag = "algorithm",
    content = "hyperparameters",
    rename_all = "snake_case"
)]
pub enum Hyperparameters {
    Knn(KnnParams),
    Cart(CartParams),
    RandomForest(ForestParams),
    Gbm(GbmParams),
}

impl Hyperparameters {
    pub fn default_for(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Knn => Hyperparameters::Knn(KnnParams::default()),
            Algorithm::Cart => Hyperparameters::Cart(CartParams::default()),
            Algorithm::RandomForest => Hyperparameters::RandomForest(ForestParams::default()),
            Algorithm::Gbm => Hyperparameters::Gbm(GbmParams::default()),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Hyperparameters::Knn(_) => Algorithm::Knn,
            Hyperparameters::Cart(_) => Algorithm::Cart,
            Hyperparameters::RandomForest(_) => Algorithm::RandomForest,
            Hyperparameters::Gbm(_) => Algorithm::Gbm,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(ModelError::Hyperparameter(msg.to_string()));
        match self {
            Hyperparameters::Knn(p) if p.k == 0 => bad("knn k must be at least 1"),
            Hyperparameters::Cart(p) if p.min_leaf == 0 => bad("cart min_leaf must be at least 1"),
            Hyperparameters::Cart(p) if !(p.cp >= 0.0 && p.cp.is_finite()) => {
                bad("cart cp must be a finite non-negative number")
            }
            Hyperparameters::RandomForest(p) if p.tree_count == 0 => {
                bad("random_forest tree_count must be at least 1")
            }
            Hyperparameters::RandomForest(p) if p.mtry == Some(0) => {
                bad("random_forest mtry must be at least 1")
            }
            Hyperparameters::Gbm(p) if !(p.shrinkage > 0.0 && p.shrinkage <= 1.0) => {
                bad("gbm shrinkage must be in (0, 1]")
            }
            Hyperparameters::Gbm(p) if !(p.subsample > 0.0 && p.subsample <= 1.0) => {
                bad("gbm subsample must be in (0, 1]")
            }
            Hyperparameters::Gbm(p) if p.min_leaf == 0 => bad("gbm min_leaf must be at least 1"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub task: Task,
    #[serde(flatten)]
    pub params: Hyperparameters,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(task: Task, params: Hyperparameters, seed: u64) -> Self {
        ModelSpec { task, params, seed }
    }

    pub fn with_defaults(algorithm: Algorithm, task: Task, seed: u64) -> Self {
        Self::new(task, Hyperparameters::default_for(algorithm), seed)
    }

    pub fn algorithm(&self) -> Algorithm {
        self.params.algorithm()
    }
}

/// Training target.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    Regression(Vec<f64>),
    Classification(Vec<String>),
}

impl Target {
    pub fn len(&self) -> usize {
        match self {
            Target::Regression(v) => v.len(),
            Target::Classification(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, indices: &[usize]) -> Target {
        match self {
            Target::Regression(v) => Target::Regression(indices.iter().map(|&i| v[i]).collect()),
            Target::Classification(v) => {
                Target::Classification(indices.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }
}

/// Fitted structure per algorithm. Classification boosting keeps one
/// booster per class level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnedStructure {
    Knn(KnnModel),
    Cart(Tree),
    RandomForest(Vec<Tree>),
    Gbm(Vec<Booster>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predictions {
    Regression(Vec<f64>),
    Classification {
        levels: Vec<String>,
        /// Index into `levels` per row.
        predicted: Vec<usize>,
        /// Per-row, per-level scores (vote or leaf proportions; raw
        /// one-vs-rest outputs for gbm).
        scores: Vec<Vec<f64>>,
    },
}

impl Predictions {
    pub fn predicted_levels(&self) -> Vec<String> {
        match self {
            Predictions::Regression(v) => v.iter().map(|x| x.to_string()).collect(),
            Predictions::Classification {
                levels, predicted, ..
            } => predicted.iter().map(|&i| levels[i].clone()).collect(),
        }
    }

    /// Regression value, or the score of the predicted class.
    pub fn scalar_scores(&self) -> Vec<f64> {
        match self {
            Predictions::Regression(v) => v.clone(),
            Predictions::Classification {
                predicted, scores, ..
            } => predicted.iter().zip(scores).map(|(&p, s)| s[p]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub feature_names: Vec<String>,
    pub class_levels: Vec<String>,
    pub structure: LearnedStructure,
}

/// Fits a model; identical inputs give identical models.
pub fn fit(spec: &ModelSpec, features: &FeatureMatrix, target: &Target) -> Result<TrainedModel> {
    spec.params.validate()?;
    let n = features.n_rows();
    if n == 0 || features.n_cols() == 0 {
        return Err(ModelError::EmptyData);
    }
    if target.len() != n {
        return Err(ModelError::TargetLength {
            found: target.len(),
            expected: n,
        });
    }
    let columns: Vec<Vec<f64>> = (0..features.n_cols()).map(|j| features.column(j)).collect();
    let (class_levels, codes, values) = match (spec.task, target) {
        (Task::Regression, Target::Regression(y)) => (Vec::new(), Vec::new(), y.clone()),
        (Task::Classification, Target::Classification(labels)) => {
            let levels: Vec<String> = labels
                .iter()
                .cloned()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if levels.len() < 2 {
                return Err(ModelError::SingleLevel(levels.len()));
            }
            let codes: Vec<usize> = labels
                .iter()
                .map(|l| levels.binary_search(l).expect("level collected above"))
                .collect();
            let values = codes.iter().map(|&c| c as f64).collect();
            (levels, codes, values)
        }
        (task, Target::Regression(_)) => {
            return Err(ModelError::TaskMismatch {
                task,
                target: "numeric",
            })
        }
        (task, Target::Classification(_)) => {
            return Err(ModelError::TaskMismatch {
                task,
                target: "categorical",
            })
        }
    };
    let labels = match spec.task {
        Task::Regression => Labels::Values(&values),
        Task::Classification => Labels::Classes {
            codes: &codes,
            n_classes: class_levels.len(),
        },
    };
    let all_rows: Vec<usize> = (0..n).collect();
    let structure = match spec.params {
        Hyperparameters::Knn(p) => {
            LearnedStructure::Knn(KnnModel::fit(&columns, values.clone(), p.k, p.standardize))
        }
        Hyperparameters::Cart(p) => {
            LearnedStructure::Cart(grow_tree(&columns, labels, &all_rows, p.rules(), None))
        }
        Hyperparameters::RandomForest(p) => LearnedStructure::RandomForest(forest::build_forest(
            &columns,
            labels,
            n,
            p.tree_count,
            p.sampling,
            p.tree_rules(spec.task, columns.len()),
            spec.seed,
        )),
        Hyperparameters::Gbm(p) => {
            let config = p.boosting();
            let boosters = match spec.task {
                Task::Regression => vec![build_booster(&columns, &values, &config, spec.seed)],
                Task::Classification => (0..class_levels.len())
                    .map(|k| {
                        let one_hot: Vec<f64> = codes
                            .iter()
                            .map(|&c| if c == k { 1.0 } else { 0.0 })
                            .collect();
                        build_booster(
                            &columns,
                            &one_hot,
                            &config,
                            derive_seed(spec.seed, k as u64),
                        )
                    })
                    .collect(),
            };
            LearnedStructure::Gbm(boosters)
        }
    };
    Ok(TrainedModel {
        spec: *spec,
        feature_names: features.names().to_vec(),
        class_levels,
        structure,
    })
}

pub(crate) fn argmax(values: &[f64]) -> usize {
    tree::argmax(values)
}

impl TrainedModel {
    pub fn task(&self) -> Task {
        self.spec.task
    }

    pub fn algorithm(&self) -> Algorithm {
        self.spec.algorithm()
    }

    fn check_schema(&self, rows: &FeatureMatrix) -> Result<()> {
        if rows.names() != self.feature_names.as_slice() {
            return Err(ModelError::Schema {
                expected: self.feature_names.clone(),
                found: rows.names().to_vec(),
            });
        }
        Ok(())
    }

    fn predict_row_value(&self, row: &[f64]) -> f64 {
        match &self.structure {
            LearnedStructure::Knn(m) => m.predict_mean(row),
            LearnedStructure::Cart(t) => t.predict_value(row),
            LearnedStructure::RandomForest(trees) => forest::forest_mean(trees, row),
            LearnedStructure::Gbm(b) => b[0].predict(row),
        }
    }

    fn predict_row_scores(&self, row: &[f64]) -> Vec<f64> {
        let k = self.class_levels.len();
        match &self.structure {
            LearnedStructure::Knn(m) => m.predict_votes(row, k),
            LearnedStructure::Cart(t) => match t.leaf_for(row) {
                tree::LeafOutput::Proportions(p) => p.clone(),
                tree::LeafOutput::Value(v) => {
                    let mut s = vec![0.0; k];
                    s[*v as usize] = 1.0;
                    s
                }
            },
            LearnedStructure::RandomForest(trees) => forest::forest_votes(trees, row, k),
            LearnedStructure::Gbm(b) => b.iter().map(|booster| booster.predict(row)).collect(),
        }
    }

    /// Pure prediction; rows must carry exactly the training feature names.
    pub fn predict(&self, rows: &FeatureMatrix) -> Result<Predictions> {
        self.check_schema(rows)?;
        Ok(match self.spec.task {
            Task::Regression => {
                Predictions::Regression(rows.rows().map(|r| self.predict_row_value(r)).collect())
            }
            Task::Classification => {
                let scores: Vec<Vec<f64>> =
                    rows.rows().map(|r| self.predict_row_scores(r)).collect();
                Predictions::Classification {
                    levels: self.class_levels.clone(),
                    predicted: scores.iter().map(|s| argmax(s)).collect(),
                    scores,
                }
            }
        })
    }

    /// Scalar score per row: the regression output, or the predicted
    /// class's score for classifiers.
    pub fn predict_scores(&self, rows: &FeatureMatrix) -> Result<Vec<f64>> {
        Ok(self.predict(rows)?.scalar_scores())
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            format_version: FORMAT_VERSION,
            spec: self.spec,
            feature_names: self.feature_names.clone(),
            class_levels: self.class_levels.clone(),
            structure: self.structure.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        use serde::Deserialize as _;
        let mut de = serde_json::Deserializer::from_str(text);
        de.disable_recursion_limit();
        let doc = ModelDocument::deserialize(&mut de)?;
        de.end()?;
        if doc.format_version != FORMAT_VERSION {
            return Err(ModelError::FormatVersion(doc.format_version));
        }
        doc.spec.params.validate()?;
        Ok(TrainedModel {
            spec: doc.spec,
            feature_names: doc.feature_names,
            class_levels: doc.class_levels,
            structure: doc.structure,
        })
    }
}

/// Versioned on-disk model: a header (version, algorithm, task,
/// hyperparameters, seed, features, class levels) and the learned structure.
#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    format_version: u32,
    #[serde(flatten)]
    spec: ModelSpec,
    feature_names: Vec<String>,
    class_levels: Vec<String>,
    structure: LearnedStructure,
}
