//! Random forests: bootstrap-aggregated CART trees with per-node feature
//! subsampling.

use rand::Rng;
use rayon::prelude::*;

use super::tree::{grow_tree, Labels, Tree, TreeRules};
use super::ForestSampling;
use crate::seed::rng_for;

/// Grows `tree_count` trees. Tree `t` draws its bootstrap sample and feature
/// subsets from a stream derived from `(seed, t)`, so the result does not
/// depend on how trees are scheduled across threads.
pub fn build_forest(
    columns: &[Vec<f64>],
    labels: Labels<'_>,
    n_rows: usize,
    tree_count: usize,
    sampling: ForestSampling,
    rules: TreeRules,
    seed: u64,
) -> Vec<Tree> {
    (0..tree_count)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(seed, t as u64);
            let rows: Vec<usize> = match sampling {
                ForestSampling::Bootstrap => {
                    (0..n_rows).map(|_| rng.random_range(0..n_rows)).collect()
                }
                ForestSampling::Full => (0..n_rows).collect(),
            };
            grow_tree(columns, labels, &rows, rules, Some(&mut rng))
        })
        .collect()
}

/// Mean of the trees' regression outputs.
pub fn forest_mean(trees: &[Tree], row: &[f64]) -> f64 {
    trees.iter().map(|t| t.predict_value(row)).sum::<f64>() / trees.len() as f64
}

/// Share of trees voting for each class.
pub fn forest_votes(trees: &[Tree], row: &[f64], n_classes: usize) -> Vec<f64> {
    let mut votes = vec![0.0; n_classes];
    for t in trees {
        votes[t.predict_class(row)] += 1.0;
    }
    let total = trees.len() as f64;
    votes.iter_mut().for_each(|v| *v /= total);
    votes
}
