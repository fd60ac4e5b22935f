use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{draw_features, Hyperparams, TrainingSet};
use crate::error::{Error, Result};
use crate::seed;

/// One node of a tree stored in preorder. A split's left child is the next
/// node; `right` is the index of its right child.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    /// Class-1 fraction of the training rows that reached the leaf.
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn from_nodes(nodes: Vec<TreeNode>) -> Result<Self> {
        let tree = Self { nodes };
        tree.check_structure()?;
        Ok(tree)
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Leaf fraction reached by `x`. Rows with `x[feature] <= threshold` go left.
    pub fn leaf_fraction(&self, x: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                TreeNode::Leaf(f) => return f,
                TreeNode::Split {
                    feature,
                    threshold,
                    right,
                } => {
                    k = if x[feature] <= threshold { k + 1 } else { right };
                }
            }
        }
    }

    pub fn votes(&self, x: &[f64]) -> bool {
        self.leaf_fraction(x) > 0.5
    }

    pub(crate) fn validate(&self, p: usize) -> Result<()> {
        self.check_structure()?;
        for node in &self.nodes {
            match *node {
                TreeNode::Leaf(f) if !(0.0..=1.0).contains(&f) => {
                    return Err(Error::InvalidInput(format!("leaf fraction {f} outside [0, 1]")));
                }
                TreeNode::Split {
                    feature, threshold, ..
                } if feature >= p || !threshold.is_finite() => {
                    return Err(Error::InvalidInput(format!(
                        "split on feature {feature} at {threshold} is invalid for {p} features"
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Checks that the nodes form exactly one preorder tree.
    fn check_structure(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(format!("malformed tree: {msg}")));
        if self.nodes.is_empty() {
            return bad("no nodes".into());
        }
        // Each entry is the index where a subtree must start.
        let mut expected = vec![0usize];
        let mut next = 0usize;
        while let Some(start) = expected.pop() {
            if start != next || start >= self.nodes.len() {
                return bad(format!("subtree expected at {start}, next free node is {next}"));
            }
            next += 1;
            if let TreeNode::Split { right, .. } = self.nodes[start] {
                if right <= start + 1 {
                    return bad(format!("node {start} has right child {right}"));
                }
                expected.push(right);
                expected.push(start + 1);
            }
        }
        if next != self.nodes.len() {
            return bad(format!("{} trailing nodes", self.nodes.len() - next));
        }
        Ok(())
    }
}

/// Best split found for a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Child-size-weighted Gini impurity.
    pub impurity: f64,
    pub left_rows: u64,
    pub right_rows: u64,
}

/// Purity score of a split, `(a_l^2 + b_l^2) / n_l + (a_r^2 + b_r^2) / n_r`,
/// kept as an exact fraction. Larger means lower weighted Gini impurity.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(left: (u64, u64), right: (u64, u64)) -> Self {
        let sq = |(a, b): (u64, u64)| (a as u128) * (a as u128) + (b as u128) * (b as u128);
        let n_l = (left.0 + left.1) as u128;
        let n_r = (right.0 + right.1) as u128;
        Self {
            num: sq(left) * n_r + sq(right) * n_l,
            den: n_l * n_r,
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

fn weighted_gini(left: (u64, u64), right: (u64, u64)) -> f64 {
    let n_l = (left.0 + left.1) as f64;
    let n_r = (right.0 + right.1) as f64;
    let g = |(a, b): (u64, u64), n: f64| 1.0 - (a as f64 / n).powi(2) - (b as f64 / n).powi(2);
    (n_l * g(left, n_l) + n_r * g(right, n_r)) / (n_l + n_r)
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid >= hi {
        lo
    } else {
        mid
    }
}

/// Minimum weighted-Gini split of `rows` (duplicates allowed) over
/// `candidates`, trying every midpoint between consecutive distinct values.
///
/// Ties go to the lowest feature index, then the smallest threshold. Returns
/// `None` when no candidate feature has two distinct values.
pub fn best_split(data: &TrainingSet, rows: &[usize], candidates: &[usize]) -> Option<Split> {
    let mut sorted = rows.to_vec();
    sorted.sort_unstable();
    let mut weighted: Vec<(usize, u32)> = Vec::new();
    for i in sorted {
        match weighted.last_mut() {
            Some((j, c)) if *j == i => *c += 1,
            _ => weighted.push((i, 1)),
        }
    }
    best_split_weighted(data, &weighted, candidates, 1)
}

pub(crate) fn best_split_weighted(
    data: &TrainingSet,
    rows: &[(usize, u32)],
    candidates: &[usize],
    min_leaf: u64,
) -> Option<Split> {
    let (mut pos, mut neg) = (0u64, 0u64);
    for &(i, c) in rows {
        if data.label(i) {
            pos += c as u64;
        } else {
            neg += c as u64;
        }
    }

    let mut best: Option<(Score, Split)> = None;
    let mut order: Vec<(f64, usize, u32)> = Vec::with_capacity(rows.len());
    for &feature in candidates {
        order.clear();
        order.extend(rows.iter().map(|&(i, c)| (data.value(i, feature), i, c)));
        order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let (mut l_pos, mut l_neg) = (0u64, 0u64);
        for k in 0..order.len() - 1 {
            let (v, i, c) = order[k];
            if data.label(i) {
                l_pos += c as u64;
            } else {
                l_neg += c as u64;
            }
            let next = order[k + 1].0;
            if next == v {
                continue;
            }
            let left = (l_pos, l_neg);
            let right = (pos - l_pos, neg - l_neg);
            if left.0 + left.1 < min_leaf || right.0 + right.1 < min_leaf {
                continue;
            }
            let score = Score::new(left, right);
            let threshold = midpoint(v, next);
            let better = match &best {
                None => true,
                Some((s, b)) => match score.cmp(s) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => (feature, threshold) < (b.feature, b.threshold),
                },
            };
            if better {
                best = Some((
                    score,
                    Split {
                        feature,
                        threshold,
                        impurity: weighted_gini(left, right),
                        left_rows: left.0 + left.1,
                        right_rows: right.0 + right.1,
                    },
                ));
            }
        }
    }
    best.map(|(_, s)| s)
}

struct Pending {
    rows: Vec<(usize, u32)>,
    depth: usize,
    /// Split node whose `right` must point at this subtree.
    parent: Option<usize>,
}

/// Grows one tree in preorder. A node becomes a leaf when it is pure, too
/// small to split, at `max_depth`, or none of its drawn features vary.
pub(crate) fn grow(
    data: &TrainingSet,
    rows: Vec<(usize, u32)>,
    mtry: usize,
    hp: &Hyperparams,
    rng: &mut seed::Rng,
) -> Tree {
    let p = data.n_features();
    let min_leaf = hp.min_node_size as u64;
    let mut nodes = Vec::new();
    let mut stack = vec![Pending {
        rows,
        depth: 0,
        parent: None,
    }];
    while let Some(Pending {
        rows,
        depth,
        parent,
    }) = stack.pop()
    {
        let here = nodes.len();
        if let Some(parent) = parent {
            if let TreeNode::Split { right, .. } = &mut nodes[parent] {
                *right = here;
            }
        }
        let (pos, total) = rows.iter().fold((0u64, 0u64), |(p, t), &(i, c)| {
            (p + if data.label(i) { c as u64 } else { 0 }, t + c as u64)
        });
        let leaf = TreeNode::Leaf(pos as f64 / total as f64);
        let pure = pos == 0 || pos == total;
        if pure || total < 2 * min_leaf || hp.max_depth.is_some_and(|d| depth >= d) {
            nodes.push(leaf);
            continue;
        }
        let candidates = draw_features(p, mtry, rng);
        let Some(split) = best_split_weighted(data, &rows, &candidates, min_leaf) else {
            nodes.push(leaf);
            continue;
        };
        nodes.push(TreeNode::Split {
            feature: split.feature,
            threshold: split.threshold,
            right: usize::MAX,
        });
        let (left, right): (Vec<_>, Vec<_>) = rows
            .into_iter()
            .partition(|&(i, _)| data.value(i, split.feature) <= split.threshold);
        stack.push(Pending {
            rows: right,
            depth: depth + 1,
            parent: Some(here),
        });
        stack.push(Pending {
            rows: left,
            depth: depth + 1,
            parent: None,
        });
    }
    Tree { nodes }
}
