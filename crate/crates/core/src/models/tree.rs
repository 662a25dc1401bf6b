//! Greedy binary regression/classification trees (CART).
//!
//! Both criteria reduce to the same split score: for a node with per-class
//! counts (classification) or centered target sums (regression), the
//! impurity decrease of a split is `Σ_left²/n_left + Σ_right²/n_right −
//! Σ²/n`, which is the SSE reduction for regression and the weighted Gini
//! decrease for classification.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// What a leaf predicts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafOutput {
    Value(f64),
    Proportions(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Leaf {
        count: usize,
        output: LeafOutput,
    },
    Split {
        feature: usize,
        threshold: f64,
        count: usize,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn count(&self) -> usize {
        match self {
            Node::Leaf { count, .. } | Node::Split { count, .. } => *count,
        }
    }
}

/// Binary tree; a row goes left when `row[feature] < threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub root: Node,
}

impl Tree {
    pub fn leaf_for(&self, row: &[f64]) -> &LeafOutput {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { output, .. } => return output,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row[*feature] < *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// Regression output for a row; for classification trees, the index of
    /// the most frequent class (ties to the lowest index) as a float.
    pub fn predict_value(&self, row: &[f64]) -> f64 {
        match self.leaf_for(row) {
            LeafOutput::Value(v) => *v,
            LeafOutput::Proportions(p) => argmax(p) as f64,
        }
    }

    pub fn predict_class(&self, row: &[f64]) -> usize {
        match self.leaf_for(row) {
            LeafOutput::Value(v) => *v as usize,
            LeafOutput::Proportions(p) => argmax(p),
        }
    }

    pub fn depth(&self) -> usize {
        fn go(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(left).max(go(right)),
            }
        }
        go(&self.root)
    }

    pub fn leaf_count(&self) -> usize {
        fn go(n: &Node) -> usize {
            match n {
                Node::Leaf { .. } => 1,
                Node::Split { left, right, .. } => go(left) + go(right),
            }
        }
        go(&self.root)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Stopping and sampling rules for tree growth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeRules {
    /// Nodes with fewer rows are not split.
    pub min_split: usize,
    /// Each child must keep at least this many rows.
    pub min_leaf: usize,
    pub max_depth: usize,
    /// A split must reduce impurity by at least `cp` times the root impurity.
    pub cp: f64,
    /// Features tried per node; `None` tries all of them.
    pub mtry: Option<usize>,
}

/// Training targets, indexed by original row.
#[derive(Debug, Clone, Copy)]
pub enum Labels<'a> {
    Values(&'a [f64]),
    Classes {
        codes: &'a [usize],
        n_classes: usize,
    },
}

struct Builder<'a> {
    columns: &'a [Vec<f64>],
    labels: Labels<'a>,
    rules: TreeRules,
    min_gain: f64,
    rng: Option<&'a mut ChaCha8Rng>,
    scratch: Vec<(f64, usize)>,
}

/// Grows a tree on `rows` (indices into `columns`, duplicates allowed for
/// bootstrap samples). `columns` is column-major feature data. The RNG is
/// only used when `rules.mtry` is smaller than the feature count.
pub fn grow_tree(
    columns: &[Vec<f64>],
    labels: Labels<'_>,
    rows: &[usize],
    rules: TreeRules,
    rng: Option<&mut ChaCha8Rng>,
) -> Tree {
    let root_impurity = impurity(labels, rows);
    let mut builder = Builder {
        columns,
        labels,
        rules,
        min_gain: rules.cp * root_impurity,
        rng,
        scratch: Vec::with_capacity(rows.len()),
    };
    Tree {
        root: builder.grow(rows.to_vec(), 0),
    }
}

/// Node impurity scaled by row count: SSE for regression, `n · Gini` for
/// classification.
fn impurity(labels: Labels<'_>, rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let n = rows.len() as f64;
    match labels {
        Labels::Values(y) => {
            let m = rows.iter().map(|&r| y[r]).sum::<f64>() / n;
            rows.iter().map(|&r| (y[r] - m) * (y[r] - m)).sum()
        }
        Labels::Classes { codes, n_classes } => {
            let mut counts = vec![0.0; n_classes];
            for &r in rows {
                counts[codes[r]] += 1.0;
            }
            n - counts.iter().map(|c| c * c).sum::<f64>() / n
        }
    }
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn leaf(&self, rows: &[usize]) -> Node {
        let n = rows.len();
        let output = match self.labels {
            Labels::Values(y) => {
                LeafOutput::Value(rows.iter().map(|&r| y[r]).sum::<f64>() / n as f64)
            }
            Labels::Classes { codes, n_classes } => {
                let mut counts = vec![0usize; n_classes];
                for &r in rows {
                    counts[codes[r]] += 1;
                }
                LeafOutput::Proportions(counts.iter().map(|&c| c as f64 / n as f64).collect())
            }
        };
        Node::Leaf { count: n, output }
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        match self.labels {
            Labels::Values(y) => rows.iter().all(|&r| y[r] == y[rows[0]]),
            Labels::Classes { codes, .. } => rows.iter().all(|&r| codes[r] == codes[rows[0]]),
        }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let p = self.columns.len();
        match (self.rules.mtry, self.rng.as_deref_mut()) {
            (Some(m), Some(rng)) if m < p => {
                let mut f = sample(rng, p, m.max(1)).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..p).collect(),
        }
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> Node {
        let n = rows.len();
        if n < self.rules.min_split
            || n < 2 * self.rules.min_leaf.max(1)
            || depth >= self.rules.max_depth
            || self.is_pure(&rows)
        {
            return self.leaf(&rows);
        }
        let Some(best) = self.best_split(&rows) else {
            return self.leaf(&rows);
        };
        let column = &self.columns[best.feature];
        let (left, right): (Vec<usize>, Vec<usize>) =
            rows.iter().partition(|&&r| column[r] < best.threshold);
        let left = self.grow(left, depth + 1);
        let right = self.grow(right, depth + 1);
        Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            count: n,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<BestSplit> {
        let n = rows.len();
        let min_leaf = self.rules.min_leaf.max(1);
        // Centered regression targets keep the sum-of-squares arithmetic well
        // conditioned; class labels are accumulated as one-hot counts.
        let (centered, n_classes) = match self.labels {
            Labels::Values(y) => {
                let m = rows.iter().map(|&r| y[r]).sum::<f64>() / n as f64;
                (
                    Some(rows.iter().map(|&r| y[r] - m).collect::<Vec<f64>>()),
                    0,
                )
            }
            Labels::Classes { n_classes, .. } => (None, n_classes),
        };
        let (total_score, node_impurity) = match (&centered, self.labels) {
            (Some(c), _) => {
                let s: f64 = c.iter().sum();
                (s * s / n as f64, c.iter().map(|v| v * v).sum::<f64>())
            }
            (None, Labels::Classes { codes, .. }) => {
                let mut counts = vec![0.0; n_classes];
                for &r in rows {
                    counts[codes[r]] += 1.0;
                }
                let sq = counts.iter().map(|c| c * c).sum::<f64>() / n as f64;
                (sq, n as f64 - sq)
            }
            (None, Labels::Values(_)) => unreachable!(),
        };
        let min_gain = self.min_gain.max(node_impurity * 1e-12);
        let features = self.candidate_features();
        let mut best: Option<BestSplit> = None;
        let mut left_counts = vec![0.0; n_classes];
        let mut total_counts = vec![0.0; n_classes];
        for &f in &features {
            let column = &self.columns[f];
            self.scratch.clear();
            self.scratch
                .extend(rows.iter().enumerate().map(|(pos, &r)| (column[r], pos)));
            self.scratch
                .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if self.scratch[0].0 == self.scratch[n - 1].0 {
                continue;
            }
            let mut left_sum = 0.0;
            let total_sum: f64 = centered.as_ref().map_or(0.0, |c| c.iter().sum());
            if let Labels::Classes { codes, .. } = self.labels {
                left_counts.iter_mut().for_each(|c| *c = 0.0);
                total_counts.iter_mut().for_each(|c| *c = 0.0);
                for &r in rows {
                    total_counts[codes[r]] += 1.0;
                }
            }
            for i in 0..n - 1 {
                let (value, pos) = self.scratch[i];
                match (&centered, self.labels) {
                    (Some(c), _) => left_sum += c[pos],
                    (None, Labels::Classes { codes, .. }) => left_counts[codes[rows[pos]]] += 1.0,
                    _ => unreachable!(),
                }
                let next = self.scratch[i + 1].0;
                let n_left = i + 1;
                let n_right = n - n_left;
                if value == next || n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                let (nl, nr) = (n_left as f64, n_right as f64);
                let score = if centered.is_some() {
                    let rs = total_sum - left_sum;
                    left_sum * left_sum / nl + rs * rs / nr
                } else {
                    let (mut l2, mut r2) = (0.0, 0.0);
                    for (l, t) in left_counts.iter().zip(&total_counts) {
                        l2 += l * l;
                        r2 += (t - l) * (t - l);
                    }
                    l2 / nl + r2 / nr
                };
                let gain = score - total_score;
                if gain > min_gain && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = value + (next - value) / 2.0;
                    if threshold <= value {
                        threshold = next;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules() -> TreeRules {
        TreeRules {
            min_split: 2,
            min_leaf: 1,
            max_depth: 30,
            cp: 0.0,
            mtry: None,
        }
    }

    fn check_counts(node: &Node) {
        if let Node::Split {
            count,
            left,
            right,
            threshold,
            ..
        } = node
        {
            assert!(threshold.is_finite());
            assert_eq!(*count, left.count() + right.count());
            check_counts(left);
            check_counts(right);
        }
    }

    #[test]
    fn root_split_at_midpoint() {
        let cols = vec![vec![1.0, 2.0, 3.0, 4.0]];
        let y = [0.0, 0.0, 1.0, 1.0];
        let tree = grow_tree(&cols, Labels::Values(&y), &[0, 1, 2, 3], rules(), None);
        match &tree.root {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!((*feature, *threshold), (0, 2.5));
            }
            other => panic!("expected split, got {other:?}"),
        }
        check_counts(&tree.root);
    }

    /// Brute-force oracle: exhaustively score every candidate threshold.
    #[test]
    fn split_matches_exhaustive_search() {
        let x = [0.3, 1.7, 0.9, 2.2, 1.1, 3.0, 0.1, 2.8];
        let y = [1.0, 4.0, 1.5, 5.0, 2.0, 5.5, 0.5, 5.2];
        let sse = |vals: &[f64]| {
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
        };
        let mut sorted: Vec<f64> = x.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut best = (f64::INFINITY, 0.0);
        for w in sorted.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let l: Vec<f64> = (0..8).filter(|&i| x[i] < t).map(|i| y[i]).collect();
            let r: Vec<f64> = (0..8).filter(|&i| x[i] >= t).map(|i| y[i]).collect();
            let total = sse(&l) + sse(&r);
            if total < best.0 {
                best = (total, t);
            }
        }
        let cols = vec![x.to_vec()];
        let tree = grow_tree(
            &cols,
            Labels::Values(&y),
            &(0..8).collect::<Vec<_>>(),
            TreeRules {
                max_depth: 1,
                ..rules()
            },
            None,
        );
        match tree.root {
            Node::Split { threshold, .. } => assert_eq!(threshold, best.1),
            _ => panic!("expected split"),
        }
    }

    #[test]
    fn pure_node_and_depth_zero_are_leaves() {
        let cols = vec![vec![1.0, 2.0, 3.0]];
        let y = [2.0, 2.0, 2.0];
        let tree = grow_tree(&cols, Labels::Values(&y), &[0, 1, 2], rules(), None);
        assert_eq!(
            tree.root,
            Node::Leaf {
                count: 3,
                output: LeafOutput::Value(2.0)
            }
        );

        let y = [1.0, 2.0, 6.0];
        let tree = grow_tree(
            &cols,
            Labels::Values(&y),
            &[0, 1, 2],
            TreeRules {
                max_depth: 0,
                ..rules()
            },
            None,
        );
        assert_eq!(
            tree.root,
            Node::Leaf {
                count: 3,
                output: LeafOutput::Value(3.0)
            }
        );
    }

    #[test]
    fn ties_prefer_lowest_feature() {
        // both features separate the classes identically
        let cols = vec![vec![0.0, 0.0, 1.0, 1.0], vec![5.0, 5.0, 9.0, 9.0]];
        let codes = [0, 0, 1, 1];
        let tree = grow_tree(
            &cols,
            Labels::Classes {
                codes: &codes,
                n_classes: 2,
            },
            &[0, 1, 2, 3],
            rules(),
            None,
        );
        match &tree.root {
            Node::Split {
                feature,
                threshold,
                left,
                ..
            } => {
                assert_eq!((*feature, *threshold), (0, 0.5));
                match left.as_ref() {
                    Node::Leaf {
                        output: LeafOutput::Proportions(p),
                        ..
                    } => {
                        assert_eq!(p, &vec![1.0, 0.0])
                    }
                    other => panic!("{other:?}"),
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn min_leaf_and_cp_stop_growth() {
        let cols = vec![vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]];
        let y = [0.0, 0.0, 0.0, 0.0, 0.0, 1.0];
        let tree = grow_tree(
            &cols,
            Labels::Values(&y),
            &[0, 1, 2, 3, 4, 5],
            TreeRules {
                min_leaf: 2,
                ..rules()
            },
            None,
        );
        fn leaves_ok(n: &Node) -> bool {
            match n {
                Node::Leaf { count, .. } => *count >= 2,
                Node::Split { left, right, .. } => leaves_ok(left) && leaves_ok(right),
            }
        }
        assert!(leaves_ok(&tree.root));
        let tree = grow_tree(
            &cols,
            Labels::Values(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.01]),
            &[0, 1, 2, 3, 4, 5],
            TreeRules { cp: 1.1, ..rules() },
            None,
        );
        assert_eq!(tree.leaf_count(), 1);
    }

    #[test]
    fn leaf_values_are_training_means() {
        let cols = vec![vec![0.0, 0.1, 0.2, 5.0, 5.1, 5.2, 5.3]];
        let y = [1.0, 2.0, 4.0, 10.0, 11.0, 12.0, 20.0];
        let tree = grow_tree(
            &cols,
            Labels::Values(&y),
            &(0..7).collect::<Vec<_>>(),
            TreeRules {
                min_leaf: 3,
                max_depth: 1,
                ..rules()
            },
            None,
        );
        assert_eq!(tree.predict_value(&[0.0]), 7.0 / 3.0);
        assert_eq!(tree.predict_value(&[5.2]), 53.0 / 4.0);
    }
}
