//! Random forest classifier over parameter vectors.
//!
//! CART trees split on Gini impurity, each grown on its own bootstrap sample
//! with `mtry` features redrawn at every node. A forest's probability for a
//! point is the fraction of trees whose leaf votes for class 1 (leaf class-1
//! fraction above one half), as in majority-vote random forests.

mod format;
mod tree;

use rand::seq::index::sample;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::Scale;
use crate::seed::{self, stream};

pub use format::{FOREST_FORMAT, FOREST_VERSION};
pub use tree::{best_split, Split, Tree, TreeNode};

/// Labelled rows: features on the prior sampling scale, label `true` for accepted.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    n_features: usize,
    features: Vec<f64>,
    labels: Vec<bool>,
    info: Vec<FeatureInfo>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureInfo {
    pub name: String,
    pub scale: Scale,
}

impl TrainingSet {
    pub fn new(rows: &[Vec<f64>], labels: Vec<bool>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "training needs at least 2 rows, got {}",
                rows.len()
            )));
        }
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                actual: labels.len(),
            });
        }
        let p = rows[0].len();
        if p == 0 {
            return Err(Error::InvalidInput("training rows have no features".into()));
        }
        let mut features = Vec::with_capacity(rows.len() * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    actual: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(
                    "training features must be finite".into(),
                ));
            }
            features.extend_from_slice(row);
        }
        match labels.iter().filter(|&&l| l).count() {
            0 => return Err(Error::SingleClass("all rejected")),
            k if k == labels.len() => return Err(Error::SingleClass("all accepted")),
            _ => {}
        }
        let info = (0..p)
            .map(|k| FeatureInfo {
                name: format!("x{k}"),
                scale: Scale::Natural,
            })
            .collect();
        Ok(Self {
            n_features: p,
            features,
            labels,
            info,
        })
    }

    pub fn with_features(mut self, info: Vec<FeatureInfo>) -> Result<Self> {
        if info.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                actual: info.len(),
            });
        }
        self.info = info;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    #[inline]
    pub(crate) fn value(&self, i: usize, feature: usize) -> f64 {
        self.features[i * self.n_features + feature]
    }

    pub fn label(&self, i: usize) -> bool {
        self.labels[i]
    }

    pub fn n_accepted(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

/// How each tree's training sample is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Bootstrap {
    /// `n` draws split evenly between the classes, each with replacement.
    #[default]
    Stratified,
    /// `n` draws with replacement from all rows.
    Plain,
    /// Every row exactly once.
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub n_trees: usize,
    /// Features tried per node; `None` means `floor(sqrt(p))`.
    pub mtry: Option<usize>,
    /// Minimum number of (bootstrap) rows in a leaf.
    pub min_node_size: usize,
    pub max_depth: Option<usize>,
    pub bootstrap: Bootstrap,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            n_trees: 500,
            mtry: None,
            min_node_size: 1,
            max_depth: None,
            bootstrap: Bootstrap::Stratified,
        }
    }
}

impl Hyperparams {
    pub fn resolved_mtry(&self, p: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| ((p as f64).sqrt().floor() as usize).max(1))
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
        }
        let mtry = self.resolved_mtry(p);
        if mtry == 0 || mtry > p {
            return Err(Error::InvalidParameter(format!(
                "mtry must lie in [1, {p}], got {mtry}"
            )));
        }
        if self.min_node_size == 0 {
            return Err(Error::InvalidParameter(
                "min_node_size must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Out-of-bag misclassification rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OobReport {
    /// Rows that were out of bag for at least one tree.
    pub evaluated: usize,
    pub error: f64,
    /// Error among accepted rows (false negatives).
    pub error_accepted: f64,
    /// Error among rejected rows (false positives).
    pub error_rejected: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub rows: usize,
    pub accepted: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    hyperparams: Hyperparams,
    features: Vec<FeatureInfo>,
    training: TrainingSummary,
    oob: Option<OobReport>,
    trees: Vec<Tree>,
}

impl Forest {
    pub fn from_trees(trees: Vec<Tree>, features: Vec<FeatureInfo>) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidInput("a forest needs at least one tree".into()));
        }
        for t in &trees {
            t.validate(features.len())?;
        }
        Ok(Self {
            hyperparams: Hyperparams {
                n_trees: trees.len(),
                ..Hyperparams::default()
            },
            features,
            training: TrainingSummary {
                rows: 0,
                accepted: 0,
                seed: 0,
            },
            oob: None,
            trees,
        })
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[FeatureInfo] {
        &self.features
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hyperparams
    }

    pub fn training(&self) -> &TrainingSummary {
        &self.training
    }

    pub fn oob(&self) -> Option<&OobReport> {
        self.oob.as_ref()
    }

    /// Fraction of trees voting for class 1 at `x`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "prediction input must be finite".into(),
            ));
        }
        Ok(self.vote_fraction(x))
    }

    fn vote_fraction(&self, x: &[f64]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.votes(x)).count();
        votes as f64 / self.trees.len() as f64
    }
}

pub fn predict_proba(forest: &Forest, x: &[f64]) -> Result<f64> {
    forest.predict_proba(x)
}

/// Gini impurity `1 - sum (count_k / total)^2`.
pub fn gini(counts: &[u64]) -> Result<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::InvalidInput("gini impurity of an empty node".into()));
    }
    let total = total as f64;
    Ok(1.0 - counts.iter().map(|&c| (c as f64 / total).powi(2)).sum::<f64>())
}

/// Grows `hyperparams.n_trees` trees in parallel; deterministic given `seed`.
pub fn train(data: &TrainingSet, hyperparams: &Hyperparams, seed: u64) -> Result<Forest> {
    hyperparams.validate(data.n_features())?;
    let mtry = hyperparams.resolved_mtry(data.n_features());
    let positives: Vec<usize> = (0..data.n_rows()).filter(|&i| data.label(i)).collect();
    let negatives: Vec<usize> = (0..data.n_rows()).filter(|&i| !data.label(i)).collect();

    let grown: Vec<(Tree, Vec<u32>)> = (0..hyperparams.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive(seed, &[stream::FOREST, t as u64]));
            let in_bag = draw_bootstrap(data.n_rows(), &positives, &negatives, hyperparams.bootstrap, &mut rng);
            let rows: Vec<(usize, u32)> = in_bag
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| (i, c))
                .collect();
            let tree = tree::grow(data, rows, mtry, hyperparams, &mut rng);
            (tree, in_bag)
        })
        .collect();

    let oob = oob_report(data, &grown);
    Ok(Forest {
        hyperparams: Hyperparams {
            mtry: Some(mtry),
            ..*hyperparams
        },
        features: data.info.clone(),
        training: TrainingSummary {
            rows: data.n_rows(),
            accepted: data.n_accepted(),
            seed,
        },
        oob,
        trees: grown.into_iter().map(|(t, _)| t).collect(),
    })
}

/// Per-row multiplicity of one bootstrap sample.
fn draw_bootstrap(
    n: usize,
    positives: &[usize],
    negatives: &[usize],
    mode: Bootstrap,
    rng: &mut seed::Rng,
) -> Vec<u32> {
    let mut counts = vec![0u32; n];
    match mode {
        Bootstrap::Disabled => counts.fill(1),
        Bootstrap::Plain => {
            for _ in 0..n {
                counts[rng.gen_range(0..n)] += 1;
            }
        }
        Bootstrap::Stratified => {
            let half = n / 2;
            for _ in 0..half {
                counts[positives[rng.gen_range(0..positives.len())]] += 1;
            }
            for _ in half..n {
                counts[negatives[rng.gen_range(0..negatives.len())]] += 1;
            }
        }
    }
    counts
}

fn oob_report(data: &TrainingSet, grown: &[(Tree, Vec<u32>)]) -> Option<OobReport> {
    let n = data.n_rows();
    let mut votes = vec![0u32; n];
    let mut seen = vec![0u32; n];
    for (tree, in_bag) in grown {
        for i in 0..n {
            if in_bag[i] == 0 {
                seen[i] += 1;
                if tree.votes(data.row(i)) {
                    votes[i] += 1;
                }
            }
        }
    }
    let (mut evaluated, mut wrong) = (0usize, 0usize);
    let (mut pos, mut pos_wrong, mut neg, mut neg_wrong) = (0usize, 0usize, 0usize, 0usize);
    for i in 0..n {
        if seen[i] == 0 {
            continue;
        }
        evaluated += 1;
        let predicted = 2 * votes[i] > seen[i];
        let miss = predicted != data.label(i);
        wrong += miss as usize;
        if data.label(i) {
            pos += 1;
            pos_wrong += miss as usize;
        } else {
            neg += 1;
            neg_wrong += miss as usize;
        }
    }
    if evaluated == 0 {
        return None;
    }
    let rate = |w: usize, t: usize| if t == 0 { 0.0 } else { w as f64 / t as f64 };
    Some(OobReport {
        evaluated,
        error: rate(wrong, evaluated),
        error_accepted: rate(pos_wrong, pos),
        error_rejected: rate(neg_wrong, neg),
    })
}

/// Draws `mtry` distinct feature indices, returned in ascending order.
pub(crate) fn draw_features(p: usize, mtry: usize, rng: &mut seed::Rng) -> Vec<usize> {
    if mtry >= p {
        return (0..p).collect();
    }
    let mut picked = sample(rng, p, mtry).into_vec();
    picked.sort_unstable();
    picked
}
