//! Random-forest classifier: bootstrap-sampled trees grown on Gini impurity
//! with a fresh random feature subset at every node.
//!
//! Each tree draws from its own [`RandomStream`] addressed by
//! `(master_seed, tree_index)`, so trees can be grown in parallel and the
//! forest is bit-identical regardless of scheduling. Leaves keep the class
//! counts of the (bootstrap) rows that reached them, which makes every tree a
//! probabilistic predictor.

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{Matrix, ProbVector, RandomStream};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForestError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid forest configuration: {0}")]
    InvalidConfig(String),
    #[error("label {label} at row {row} is not below the class count {n_classes}")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        n_classes: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("malformed model: {0}")]
    MalformedModel(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        class_counts: Vec<u32>,
    },
}

impl TreeNode {
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// The leaf a point is routed to.
    ///
    /// Panics if `x_h` is shorter than a feature index used by the tree.
    pub fn leaf_counts(&self, x_h: &[f64]) -> &[u32] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { class_counts } => return class_counts,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x_h[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    fn validate(&self, n_classes: usize, n_features: usize) -> Result<(), ForestError> {
        match self {
            TreeNode::Leaf { class_counts } => {
                if class_counts.len() != n_classes {
                    return Err(ForestError::MalformedModel(format!(
                        "leaf with {} counts in a {n_classes}-class model",
                        class_counts.len()
                    )));
                }
                if class_counts.iter().all(|&c| c == 0) {
                    return Err(ForestError::MalformedModel("empty leaf".into()));
                }
                Ok(())
            }
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if *feature >= n_features || !threshold.is_finite() {
                    return Err(ForestError::MalformedModel(format!(
                        "split on feature {feature} at {threshold}"
                    )));
                }
                left.validate(n_classes, n_features)?;
                right.validate(n_classes, n_features)
            }
        }
    }
}

/// Normalized class counts of the leaf `x_h` falls into.
pub fn tree_predict_proba(tree: &TreeNode, x_h: &[f64]) -> ProbVector {
    ProbVector::from_counts(tree.leaf_counts(x_h)).expect("leaves hold at least one row")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub trees_count: usize,
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    /// Defaults to `ceil(sqrt(k))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub master_seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees_count: 100,
            max_depth: Some(2),
            features_per_split: None,
            bootstrap: true,
            master_seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn resolved_features_per_split(&self, n_features: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| ((n_features as f64).sqrt().ceil() as usize).max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteMode {
    /// Most frequent per-tree argmax.
    Hard,
    /// Argmax of the mean probability vector.
    Soft,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    /// Config with `features_per_split` resolved.
    pub config: ForestConfig,
    pub n_classes: usize,
    pub n_features: usize,
    pub trees: Vec<TreeNode>,
}

/// Sum of squared class counts over node size, kept as an exact fraction.
/// Maximizing `Σ_children Σ_c n_c² / n_child` minimizes weighted Gini impurity.
#[derive(Debug, Clone, Copy)]
struct Purity {
    num: u128,
    den: u128,
}

impl Purity {
    fn of(counts: &[u64], total: u64) -> Purity {
        Purity {
            num: counts.iter().map(|&c| u128::from(c * c)).sum(),
            den: u128::from(total),
        }
    }

    fn of_split(left: &[u64], n_left: u64, right: &[u64], n_right: u64) -> Purity {
        let a: u128 = left.iter().map(|&c| u128::from(c * c)).sum();
        let b: u128 = right.iter().map(|&c| u128::from(c * c)).sum();
        let (nl, nr) = (u128::from(n_left), u128::from(n_right));
        Purity {
            num: a * nr + b * nl,
            den: nl * nr,
        }
    }

    fn better_than(self, other: Purity) -> bool {
        self.num * other.den > other.num * self.den
    }
}

struct Grower<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    n_classes: usize,
    max_depth: Option<usize>,
    features_per_split: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct SplitChoice {
    feature: usize,
    threshold: f64,
}

impl Grower<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<u64> {
        let mut counts = vec![0u64; self.n_classes];
        for &r in rows {
            counts[self.y[r]] += 1;
        }
        counts
    }

    fn grow(&self, rows: &mut [usize], depth: usize, rng: &mut RandomStream) -> TreeNode {
        let counts = self.counts(rows);
        let leaf = |counts: &[u64]| TreeNode::Leaf {
            class_counts: counts.iter().map(|&c| c as u32).collect(),
        };
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || self.max_depth.is_some_and(|d| depth >= d) {
            return leaf(&counts);
        }
        let mut features = index::sample(rng, self.x.cols(), self.features_per_split).into_vec();
        features.sort_unstable();
        let Some(choice) = best_split(self.x, self.y, self.n_classes, rows, &features) else {
            return leaf(&counts);
        };
        let mid = partition(rows, |r| self.x.get(r, choice.feature) <= choice.threshold);
        let (left_rows, right_rows) = rows.split_at_mut(mid);
        let left = self.grow(left_rows, depth + 1, rng);
        let right = self.grow(right_rows, depth + 1, rng);
        TreeNode::Split {
            feature: choice.feature,
            threshold: choice.threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

/// Stable in-place partition; returns the number of rows satisfying `pred`.
fn partition(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let (yes, no): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&r| pred(r));
    let mid = yes.len();
    rows[..mid].copy_from_slice(&yes);
    rows[mid..].copy_from_slice(&no);
    mid
}

/// Best Gini split among `features` over midpoints of consecutive distinct
/// values. Ties keep the lowest feature index, then the lowest threshold.
/// Returns `None` if no candidate strictly reduces impurity.
fn best_split(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    rows: &[usize],
    features: &[usize],
) -> Option<SplitChoice> {
    let total = rows.len() as u64;
    let mut parent = vec![0u64; n_classes];
    for &r in rows {
        parent[y[r]] += 1;
    }
    let mut best_score = Purity::of(&parent, total);
    let mut best = None;

    let mut sorted = rows.to_vec();
    for &f in features {
        sorted.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
        let mut left = vec![0u64; n_classes];
        let mut right = parent.clone();
        for i in 0..sorted.len() - 1 {
            let class = y[sorted[i]];
            left[class] += 1;
            right[class] -= 1;
            let (a, b) = (x.get(sorted[i], f), x.get(sorted[i + 1], f));
            if a == b {
                continue;
            }
            let n_left = i as u64 + 1;
            let score = Purity::of_split(&left, n_left, &right, total - n_left);
            if score.better_than(best_score) {
                best_score = score;
                best = Some(SplitChoice {
                    feature: f,
                    threshold: midpoint(a, b),
                });
            }
        }
    }
    best
}

/// A threshold `t` with `a <= t < b`.
fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m < b {
        m
    } else {
        a
    }
}

pub fn train_forest(
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    config: &ForestConfig,
) -> Result<RandomForest, ForestError> {
    let (n, k) = x.shape();
    if n == 0 {
        return Err(ForestError::EmptyDataset);
    }
    if y.len() != n {
        return Err(ForestError::DimensionMismatch(format!(
            "{n} rows but {} labels",
            y.len()
        )));
    }
    if let Some((row, &label)) = y.iter().enumerate().find(|(_, &l)| l >= n_classes) {
        return Err(ForestError::LabelOutOfRange {
            row,
            label,
            n_classes,
        });
    }
    if config.trees_count == 0 {
        return Err(ForestError::InvalidConfig(
            "trees_count must be positive".into(),
        ));
    }
    if k == 0 {
        return Err(ForestError::InvalidConfig("no features".into()));
    }
    let features_per_split = config.resolved_features_per_split(k);
    if features_per_split == 0 || features_per_split > k {
        return Err(ForestError::InvalidConfig(format!(
            "features_per_split {features_per_split} outside [1, {k}]"
        )));
    }
    let grower = Grower {
        x,
        y,
        n_classes,
        max_depth: config.max_depth,
        features_per_split,
    };
    let trees = (0..config.trees_count)
        .into_par_iter()
        .map(|t| {
            let mut rng = RandomStream::new(config.master_seed, t as u64);
            let mut rows: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grower.grow(&mut rows, 0, &mut rng)
        })
        .collect();
    Ok(RandomForest {
        config: ForestConfig {
            features_per_split: Some(features_per_split),
            ..config.clone()
        },
        n_classes,
        n_features: k,
        trees,
    })
}

fn argmax_counts(votes: &[usize]) -> usize {
    let mut best = 0;
    for (i, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = i;
        }
    }
    best
}

impl RandomForest {
    /// Assembles a forest from prebuilt trees, validating their structure.
    pub fn from_trees(
        trees: Vec<TreeNode>,
        n_classes: usize,
        n_features: usize,
        config: ForestConfig,
    ) -> Result<Self, ForestError> {
        let forest = RandomForest {
            config: ForestConfig {
                trees_count: trees.len(),
                ..config
            },
            n_classes,
            n_features,
            trees,
        };
        forest.validate()?;
        Ok(forest)
    }

    pub fn validate(&self) -> Result<(), ForestError> {
        if self.trees.len() != self.config.trees_count {
            return Err(ForestError::MalformedModel(format!(
                "{} trees but trees_count = {}",
                self.trees.len(),
                self.config.trees_count
            )));
        }
        for tree in &self.trees {
            tree.validate(self.n_classes, self.n_features)?;
            if let Some(d) = self.config.max_depth {
                if tree.depth() > d {
                    return Err(ForestError::MalformedModel(format!(
                        "tree of depth {} exceeds max_depth {d}",
                        tree.depth()
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_point(&self, x_h: &[f64]) -> Result<(), ForestError> {
        if x_h.len() != self.n_features {
            return Err(ForestError::DimensionMismatch(format!(
                "point has {} features, model expects {}",
                x_h.len(),
                self.n_features
            )));
        }
        Ok(())
    }

    /// One probability vector per tree, in tree order.
    pub fn predict_proba_per_tree(&self, x_h: &[f64]) -> Result<Vec<ProbVector>, ForestError> {
        self.check_point(x_h)?;
        Ok(self
            .trees
            .iter()
            .map(|t| tree_predict_proba(t, x_h))
            .collect())
    }

    pub fn predict_proba_mean(&self, x_h: &[f64]) -> Result<ProbVector, ForestError> {
        let members = self.predict_proba_per_tree(x_h)?;
        Ok(ProbVector::mean(&members).expect("forest has at least one tree"))
    }

    pub fn predict(&self, x_h: &[f64], mode: VoteMode) -> Result<usize, ForestError> {
        let members = self.predict_proba_per_tree(x_h)?;
        Ok(match mode {
            VoteMode::Hard => {
                let mut votes = vec![0usize; self.n_classes];
                for m in &members {
                    votes[m.argmax()] += 1;
                }
                argmax_counts(&votes)
            }
            VoteMode::Soft => ProbVector::mean(&members).expect("non-empty").argmax(),
        })
    }

    /// Replaces every leaf's counts with those of the full training rows that
    /// reach it. Leaves that no training row reaches keep their bootstrap counts.
    pub fn repopulate_leaves(&mut self, x: &Matrix, y: &[usize]) -> Result<(), ForestError> {
        if x.cols() != self.n_features || x.rows() != y.len() {
            return Err(ForestError::DimensionMismatch(format!(
                "{}x{} data with {} labels for a {}-feature model",
                x.rows(),
                x.cols(),
                y.len(),
                self.n_features
            )));
        }
        if let Some((row, &label)) = y.iter().enumerate().find(|(_, &l)| l >= self.n_classes) {
            return Err(ForestError::LabelOutOfRange {
                row,
                label,
                n_classes: self.n_classes,
            });
        }
        let rows: Vec<usize> = (0..x.rows()).collect();
        for tree in &mut self.trees {
            refill(tree, &rows, x, y);
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("forest serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ForestError> {
        let forest: RandomForest =
            serde_json::from_str(s).map_err(|e| ForestError::MalformedModel(e.to_string()))?;
        forest.validate()?;
        Ok(forest)
    }
}

fn refill(node: &mut TreeNode, rows: &[usize], x: &Matrix, y: &[usize]) {
    match node {
        TreeNode::Leaf { class_counts } => {
            if !rows.is_empty() {
                class_counts.iter_mut().for_each(|c| *c = 0);
                for &r in rows {
                    class_counts[y[r]] += 1;
                }
            }
        }
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let (l, r): (Vec<usize>, Vec<usize>) = rows
                .iter()
                .partition(|&&i| x.get(i, *feature) <= *threshold);
            refill(left, &l, x, y);
            refill(right, &r, x, y);
        }
    }
}

/// Per-tree probability vectors for `x_h`, in tree order.
pub fn forest_predict_proba(
    forest: &RandomForest,
    x_h: &[f64],
) -> Result<Vec<ProbVector>, ForestError> {
    forest.predict_proba_per_tree(x_h)
}

pub fn forest_predict(
    forest: &RandomForest,
    x_h: &[f64],
    mode: VoteMode,
) -> Result<usize, ForestError> {
    forest.predict(x_h, mode)
}
