//! k-nearest neighbors over z-scored features.

use serde::{Deserialize, Serialize};

use crate::stats::{mean, population_sd};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub means: Vec<f64>,
    /// Scale per feature; 1 for constant features or when standardization is off.
    pub scales: Vec<f64>,
    /// Standardized training rows, row-major.
    pub rows: Vec<Vec<f64>>,
    /// Regression targets, or class codes stored as floats.
    pub targets: Vec<f64>,
}

impl KnnModel {
    pub fn fit(columns: &[Vec<f64>], targets: Vec<f64>, k: usize, standardize: bool) -> Self {
        let p = columns.len();
        let n = targets.len();
        let (means, scales): (Vec<f64>, Vec<f64>) = if standardize {
            columns
                .iter()
                .map(|c| {
                    let sd = population_sd(c);
                    (mean(c), if sd > 0.0 { sd } else { 1.0 })
                })
                .unzip()
        } else {
            (vec![0.0; p], vec![1.0; p])
        };
        let rows = (0..n)
            .map(|i| {
                (0..p)
                    .map(|j| (columns[j][i] - means[j]) / scales[j])
                    .collect()
            })
            .collect();
        KnnModel {
            k,
            means,
            scales,
            rows,
            targets,
        }
    }

    /// Indices of the `k` nearest training rows; equal distances go to the
    /// lower row index.
    pub fn neighbors(&self, query: &[f64]) -> Vec<usize> {
        let z: Vec<f64> = query
            .iter()
            .zip(self.means.iter().zip(&self.scales))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        let mut dist: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let d: f64 = r.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum();
                (d, i)
            })
            .collect();
        let k = self.k.min(dist.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < dist.len() {
            dist.select_nth_unstable_by(k, cmp);
            dist.truncate(k);
        }
        dist.sort_unstable_by(cmp);
        dist.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict_mean(&self, query: &[f64]) -> f64 {
        let nb = self.neighbors(query);
        nb.iter().map(|&i| self.targets[i]).sum::<f64>() / nb.len() as f64
    }

    /// Vote share per class.
    pub fn predict_votes(&self, query: &[f64], n_classes: usize) -> Vec<f64> {
        let nb = self.neighbors(query);
        let mut votes = vec![0.0; n_classes];
        for &i in &nb {
            votes[self.targets[i] as usize] += 1.0;
        }
        let total = nb.len() as f64;
        votes.iter_mut().for_each(|v| *v /= total);
        votes
    }
}
