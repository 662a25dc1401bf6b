//! Squared-error gradient boosting with shrinkage and row subsampling.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, Labels, Tree, TreeRules};
use crate::seed::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub tree: Tree,
    pub scale: f64,
}

/// `F(x) = initial + Σ scale_m · tree_m(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Booster {
    pub initial: f64,
    pub stages: Vec<Stage>,
}

impl Booster {
    pub fn predict(&self, row: &[f64]) -> f64 {
        self.stages.iter().fold(self.initial, |acc, s| {
            acc + s.scale * s.tree.predict_value(row)
        })
    }

    /// Prediction after each number of stages, `0..=M`.
    pub fn staged_predict(&self, row: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.stages.len() + 1);
        let mut acc = self.initial;
        out.push(acc);
        for s in &self.stages {
            acc += s.scale * s.tree.predict_value(row);
            out.push(acc);
        }
        out
    }
}

pub struct BoostingConfig {
    pub rounds: usize,
    pub shrinkage: f64,
    pub subsample: f64,
    pub rules: TreeRules,
}

/// Fits one booster: start from the mean, then repeatedly fit a tree to the
/// current residuals on a subsample drawn without replacement.
pub fn build_booster(
    columns: &[Vec<f64>],
    y: &[f64],
    config: &BoostingConfig,
    seed: u64,
) -> Booster {
    let n = y.len();
    let initial = y.iter().sum::<f64>() / n as f64;
    let mut fitted = vec![initial; n];
    let mut residuals = vec![0.0; n];
    let sub_n = ((config.subsample * n as f64).floor() as usize).clamp(1, n);
    let mut stages = Vec::with_capacity(config.rounds);
    let row_major: Vec<Vec<f64>> = (0..n)
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect();
    for m in 0..config.rounds {
        for i in 0..n {
            residuals[i] = y[i] - fitted[i];
        }
        let rows: Vec<usize> = if sub_n == n {
            (0..n).collect()
        } else {
            let mut rng = rng_for(seed, m as u64);
            let mut r = sample(&mut rng, n, sub_n).into_vec();
            r.sort_unstable();
            r
        };
        let tree = grow_tree(
            columns,
            Labels::Values(&residuals),
            &rows,
            config.rules,
            None,
        );
        for (i, row) in row_major.iter().enumerate() {
            fitted[i] += config.shrinkage * tree.predict_value(row);
        }
        stages.push(Stage {
            tree,
            scale: config.shrinkage,
        });
    }
    Booster { initial, stages }
}
