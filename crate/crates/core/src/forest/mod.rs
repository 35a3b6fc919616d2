//! Random forest over binary feature vectors with entropy-based splits,
//! bagging, persona-balanced cross-validation and information-gain
//! importances.

mod cv;
mod tree;

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cv::{cross_validate_grid, make_folds, CvOutcome, GridScore};
pub use tree::{bootstrap, train_tree};

use crate::rng::Stream;

/// Features are packed into a `u64` internally.
pub const MAX_FEATURES: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForestError {
    #[error("no training samples")]
    Empty,
    #[error("feature vector has length {got}, expected {expected}")]
    FeatureLength { expected: usize, got: usize },
    #[error("at most {MAX_FEATURES} features are supported, got {0}")]
    TooManyFeatures(usize),
    #[error("persona {persona} has {count} records, not divisible into {folds} folds")]
    IndivisibleFolds {
        persona: String,
        count: usize,
        folds: usize,
    },
    #[error("invalid parameters: {0}")]
    Params(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample {
    /// One flag per tracker: true when that tracker is blocked.
    pub features: Vec<bool>,
    pub label: bool,
    pub persona: String,
}

impl Sample {
    pub fn new(features: Vec<bool>, label: bool, persona: impl Into<String>) -> Self {
        Self {
            features,
            label,
            persona: persona.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubset {
    Sqrt,
    All,
}

impl FeatureSubset {
    pub fn count(self, n_features: usize) -> usize {
        match self {
            FeatureSubset::All => n_features,
            FeatureSubset::Sqrt => ((n_features as f64).sqrt().floor() as usize).clamp(1, n_features.max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until another stopping rule fires.
    pub max_depth: Option<usize>,
    pub features_per_split: FeatureSubset,
    pub min_leaf: usize,
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::Params("n_trees must be >= 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(ForestError::Params("min_leaf must be >= 1".into()));
        }
        Ok(())
    }

    fn depth_key(&self) -> (bool, usize) {
        match self.max_depth {
            Some(d) => (false, d),
            None => (true, 0),
        }
    }
}

/// Lexicographic over (n_trees, max_depth with unbounded last,
/// features_per_split, min_leaf); used to break accuracy ties.
impl Ord for ForestParams {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n_trees
            .cmp(&other.n_trees)
            .then(self.depth_key().cmp(&other.depth_key()))
            .then(self.features_per_split.cmp(&other.features_per_split))
            .then(self.min_leaf.cmp(&other.min_leaf))
    }
}

impl PartialOrd for ForestParams {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ForestParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let depth = self
            .max_depth
            .map_or_else(|| "unbounded".to_owned(), |d| d.to_string());
        write!(
            f,
            "trees={} depth={} features={:?} min_leaf={}",
            self.n_trees, depth, self.features_per_split, self.min_leaf
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub features_per_split: Vec<FeatureSubset>,
    pub min_leaf: Vec<usize>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        Self {
            n_trees: vec![50, 100, 200],
            max_depth: vec![Some(3), Some(5), None],
            features_per_split: vec![FeatureSubset::Sqrt, FeatureSubset::All],
            min_leaf: vec![1, 2],
        }
    }
}

impl HyperGrid {
    pub fn single(params: ForestParams) -> Self {
        Self {
            n_trees: vec![params.n_trees],
            max_depth: vec![params.max_depth],
            features_per_split: vec![params.features_per_split],
            min_leaf: vec![params.min_leaf],
        }
    }

    /// Every grid point, sorted and deduplicated.
    pub fn points(&self) -> Vec<ForestParams> {
        let mut out = Vec::new();
        for &n_trees in &self.n_trees {
            for &max_depth in &self.max_depth {
                for &features_per_split in &self.features_per_split {
                    for &min_leaf in &self.min_leaf {
                        out.push(ForestParams {
                            n_trees,
                            max_depth,
                            features_per_split,
                            min_leaf,
                        });
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    pub fn validate(&self) -> Result<(), ForestError> {
        if self.n_trees.is_empty()
            || self.max_depth.is_empty()
            || self.features_per_split.is_empty()
            || self.min_leaf.is_empty()
        {
            return Err(ForestError::Params("every grid axis needs at least one value".into()));
        }
        self.points().iter().try_for_each(ForestParams::validate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        label: bool,
        samples: u64,
    },
    Split {
        feature: usize,
        /// Information gain of this split, in bits.
        gain: f64,
        samples: u64,
        if_false: Box<Node>,
        if_true: Box<Node>,
    },
}

impl Node {
    pub fn samples(&self) -> u64 {
        match self {
            Node::Leaf { samples, .. } | Node::Split { samples, .. } => *samples,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split {
                if_false, if_true, ..
            } => 1 + if_false.depth().max(if_true.depth()),
        }
    }

    fn leaf_total(&self) -> u64 {
        match self {
            Node::Leaf { samples, .. } => *samples,
            Node::Split {
                if_false, if_true, ..
            } => if_false.leaf_total() + if_true.leaf_total(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub n_features: usize,
    pub root: Node,
}

impl Tree {
    pub fn predict(&self, features: &[bool]) -> Result<bool, ForestError> {
        check_len(self.n_features, features.len())?;
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf { label, .. } => return Ok(*label),
                Node::Split {
                    feature,
                    if_false,
                    if_true,
                    ..
                } => node = if features[*feature] { if_true } else { if_false },
            }
        }
    }

    /// Sum of leaf sample counts; equals the training (bootstrap) size.
    pub fn leaf_total(&self) -> u64 {
        self.root.leaf_total()
    }

    /// Unnormalized importances: per feature, the sum over splitting nodes of
    /// (node samples / root samples) x gain.
    pub fn weighted_gains(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_features];
        let root = self.root.samples() as f64;
        let mut stack = vec![&self.root];
        while let Some(node) = stack.pop() {
            if let Node::Split {
                feature,
                gain,
                samples,
                if_false,
                if_true,
            } = node
            {
                out[*feature] += *samples as f64 / root * gain;
                stack.push(if_false);
                stack.push(if_true);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub params: ForestParams,
    pub seed: u64,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Majority vote; a tied vote predicts false.
    pub fn predict(&self, features: &[bool]) -> Result<bool, ForestError> {
        check_len(self.n_features, features.len())?;
        let mut yes = 0usize;
        for t in &self.trees {
            yes += usize::from(t.predict(features)?);
        }
        Ok(2 * yes > self.trees.len())
    }

    pub fn accuracy(&self, samples: &[Sample]) -> Result<f64, ForestError> {
        if samples.is_empty() {
            return Err(ForestError::Empty);
        }
        Ok(self.correct(samples)? as f64 / samples.len() as f64)
    }

    pub(crate) fn correct(&self, samples: &[Sample]) -> Result<usize, ForestError> {
        let mut n = 0;
        for s in samples {
            n += usize::from(self.predict(&s.features)? == s.label);
        }
        Ok(n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    /// Non-negative, summing to 1, or all zero when the forest never splits.
    pub gains: Vec<f64>,
}

pub fn feature_importance(model: &ForestModel) -> FeatureImportance {
    let mut acc = vec![0.0; model.n_features];
    for t in &model.trees {
        for (a, g) in acc.iter_mut().zip(t.weighted_gains()) {
            *a += g;
        }
    }
    let n = model.trees.len().max(1) as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    let total: f64 = acc.iter().sum();
    if total > 0.0 {
        acc.iter_mut().for_each(|a| *a /= total);
    }
    FeatureImportance { gains: acc }
}

/// Shannon entropy of a binary label multiset, in bits.
pub fn entropy(labels: &[bool]) -> Result<f64, ForestError> {
    if labels.is_empty() {
        return Err(ForestError::Empty);
    }
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    Ok(entropy_counts(pos, labels.len() as f64 - pos))
}

pub(crate) fn entropy_counts(pos: f64, neg: f64) -> f64 {
    let n = pos + neg;
    if n <= 0.0 {
        return 0.0;
    }
    [pos, neg]
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / n;
            -p * p.log2()
        })
        .sum()
}

fn check_len(expected: usize, got: usize) -> Result<(), ForestError> {
    if expected != got {
        return Err(ForestError::FeatureLength { expected, got });
    }
    Ok(())
}

pub(crate) fn check_samples(samples: &[Sample]) -> Result<usize, ForestError> {
    let first = samples.first().ok_or(ForestError::Empty)?;
    let k = first.features.len();
    if k > MAX_FEATURES {
        return Err(ForestError::TooManyFeatures(k));
    }
    for s in samples {
        check_len(k, s.features.len())?;
    }
    Ok(k)
}

fn canonical(samples: &[Sample]) -> Vec<Sample> {
    let mut v = samples.to_vec();
    v.sort_by(|a, b| {
        (&a.persona, &a.features, a.label).cmp(&(&b.persona, &b.features, b.label))
    });
    v
}

/// Bagged forest. Tree `i` draws its bootstrap and its per-node feature
/// subsets from the substream `(seed, "tree", i)`; samples are put in
/// canonical order first so input order does not matter.
pub fn train_forest(
    samples: &[Sample],
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel, ForestError> {
    params.validate()?;
    let n_features = check_samples(samples)?;
    let canon = canonical(samples);
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng: Stream = crate::substream!(seed, "tree", i);
            tree::train_bagged(&canon, n_features, params, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        params: *params,
        seed,
        n_features,
        trees,
    })
}
