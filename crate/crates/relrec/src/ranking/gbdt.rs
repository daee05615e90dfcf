//! Gradient-boosted regression trees for ranking.
//!
//! Each round fits a depth-capped tree to the negative gradient of the
//! objective (RankNet cross-entropy over score differences of pairs, or
//! weighted logistic loss on binary labels) and adds it scaled by the
//! shrinkage. Split search is exact over sorted unique feature values; leaf
//! values take a Newton step. Deterministic per seed: features and
//! thresholds are scanned in fixed order and row subsampling uses a derived
//! RNG stream per tree.

use super::{ModelVariant, Objective, RankingModel, TrainMeta};
use crate::util;
use crate::{Error, Result};

const LAMBDA: f64 = 1e-6;
const MAX_LEAF_VALUE: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
}

impl Tree {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if x.get(*feature as usize).copied().unwrap_or(0.0) <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub(crate) fn from_nodes(nodes: Vec<Node>) -> Tree {
        Tree { nodes }
    }

    pub(crate) fn nodes(&self) -> &[Node] {
        &self.nodes
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GbdtParams {
    pub num_trees: usize,
    pub max_depth: usize,
    pub shrinkage: f64,
    pub min_leaf_count: usize,
    /// Row-subsample ratio per tree, in (0, 1].
    pub subsample: f64,
    /// Weight multiplier for positive examples under the logistic
    /// objective; None derives #neg/#pos from the data.
    pub positive_class_weight: Option<f64>,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            num_trees: 100,
            max_depth: 4,
            shrinkage: 0.1,
            min_leaf_count: 10,
            subsample: 1.0,
            positive_class_weight: None,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_trees == 0 || self.max_depth == 0 {
            return Err(Error::invalid("num_trees and max_depth must be positive"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::invalid("subsample must be in (0, 1]"));
        }
        if !self.shrinkage.is_finite() || self.shrinkage < 0.0 {
            return Err(Error::invalid("shrinkage must be non-negative"));
        }
        Ok(())
    }
}

/// Training data for the two GBDT objectives. `fingerprint` is the feature
/// schema the rows were extracted with and is stamped onto the model.
pub enum GbdtTrainingData {
    Logistic {
        features: Vec<Vec<f64>>,
        labels: Vec<bool>,
        fingerprint: u64,
    },
    RankNet {
        features: Vec<Vec<f64>>,
        /// (higher, lower) row indices.
        pairs: Vec<(u32, u32)>,
        fingerprint: u64,
    },
}

impl GbdtTrainingData {
    fn features(&self) -> &[Vec<f64>] {
        match self {
            GbdtTrainingData::Logistic { features, .. } => features,
            GbdtTrainingData::RankNet { features, .. } => features,
        }
    }

    fn fingerprint(&self) -> u64 {
        match self {
            GbdtTrainingData::Logistic { fingerprint, .. } => *fingerprint,
            GbdtTrainingData::RankNet { fingerprint, .. } => *fingerprint,
        }
    }

    fn objective(&self) -> Objective {
        match self {
            GbdtTrainingData::Logistic { .. } => Objective::Logistic,
            GbdtTrainingData::RankNet { .. } => Objective::RankNet,
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fit the boosted ensemble. The initial score is zero, so shrinkage 0
/// degenerates to an all-zero model by construction.
pub fn train_gbdt(data: &GbdtTrainingData, hp: &GbdtParams, seed: u64) -> Result<RankingModel> {
    hp.validate()?;
    let features = data.features();
    let n = features.len();
    if n == 0 {
        return Err(Error::invalid("empty training data"));
    }
    let dim = features[0].len();
    for row in features {
        if row.len() != dim {
            return Err(Error::invalid("ragged feature rows"));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
    }
    if let GbdtTrainingData::RankNet { pairs, .. } = data {
        if pairs.is_empty() {
            return Err(Error::invalid("no training pairs"));
        }
        for &(a, b) in pairs {
            if a as usize >= n || b as usize >= n {
                return Err(Error::invalid("pair index out of range"));
            }
        }
    }

    let class_weight = match data {
        GbdtTrainingData::Logistic { labels, .. } => {
            if labels.len() != n {
                return Err(Error::invalid("labels/features length mismatch"));
            }
            let pos = labels.iter().filter(|l| **l).count();
            let neg = n - pos;
            if pos == 0 || neg == 0 {
                return Err(Error::invalid("logistic objective needs both classes"));
            }
            hp.positive_class_weight
                .unwrap_or(neg as f64 / pos as f64)
        }
        GbdtTrainingData::RankNet { .. } => 1.0,
    };

    // Pre-sorted row indices per feature, reused by every tree.
    let sorted: Vec<Vec<u32>> = (0..dim)
        .map(|f| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| {
                features[a as usize][f]
                    .partial_cmp(&features[b as usize][f])
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect();

    let mut scores = vec![0.0f64; n];
    let mut grad = vec![0.0f64; n];
    let mut hess = vec![0.0f64; n];
    let mut trees = Vec::with_capacity(hp.num_trees);
    for tree_index in 0..hp.num_trees {
        match data {
            GbdtTrainingData::Logistic { labels, .. } => {
                for i in 0..n {
                    let w = if labels[i] { class_weight } else { 1.0 };
                    let p = sigmoid(scores[i]);
                    let y = if labels[i] { 1.0 } else { 0.0 };
                    grad[i] = w * (y - p);
                    hess[i] = w * p * (1.0 - p);
                }
            }
            GbdtTrainingData::RankNet { pairs, .. } => {
                grad.iter_mut().for_each(|g| *g = 0.0);
                hess.iter_mut().for_each(|h| *h = 0.0);
                for &(hi, lo) in pairs {
                    let (hi, lo) = (hi as usize, lo as usize);
                    let lambda = sigmoid(-(scores[hi] - scores[lo]));
                    let curvature = lambda * (1.0 - lambda);
                    grad[hi] += lambda;
                    grad[lo] -= lambda;
                    hess[hi] += curvature;
                    hess[lo] += curvature;
                }
            }
        }

        let in_sample: Vec<bool> = if hp.subsample < 1.0 {
            let keep = ((n as f64 * hp.subsample).floor() as usize).max(1);
            let mut idx: Vec<usize> = (0..n).collect();
            let mut rng = util::rng_from(util::derive_seed_indexed(seed, "tree", tree_index as u64));
            for i in 0..keep {
                let j = rand::Rng::random_range(&mut rng, i..n);
                idx.swap(i, j);
            }
            let mut mask = vec![false; n];
            for &i in &idx[..keep] {
                mask[i] = true;
            }
            mask
        } else {
            vec![true; n]
        };

        let rows: Vec<u32> = (0..n as u32).filter(|&i| in_sample[i as usize]).collect();
        let tree = fit_tree(features, &grad, &hess, &sorted, &rows, hp);
        for i in 0..n {
            scores[i] += hp.shrinkage * tree.eval(&features[i]);
        }
        trees.push(tree);
    }

    Ok(RankingModel {
        variant: ModelVariant::Gbdt {
            trees,
            shrinkage: hp.shrinkage,
        },
        objective: data.objective(),
        fingerprint: data.fingerprint(),
        meta: TrainMeta {
            seed,
            ..TrainMeta::default()
        },
    })
}

struct SplitChoice {
    feature: u32,
    threshold: f64,
    gain: f64,
}

fn fit_tree(
    features: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    sorted: &[Vec<u32>],
    rows: &[u32],
    hp: &GbdtParams,
) -> Tree {
    let mut nodes = Vec::new();
    grow(features, grad, hess, sorted, rows, hp, 0, &mut nodes);
    Tree { nodes }
}

fn leaf_value(grad_sum: f64, hess_sum: f64) -> f64 {
    (grad_sum / (hess_sum + LAMBDA)).clamp(-MAX_LEAF_VALUE, MAX_LEAF_VALUE)
}

fn grow(
    features: &[Vec<f64>],
    grad: &[f64],
    hess: &[f64],
    sorted: &[Vec<u32>],
    rows: &[u32],
    hp: &GbdtParams,
    depth: usize,
    nodes: &mut Vec<Node>,
) -> u32 {
    let grad_sum: f64 = rows.iter().map(|&i| grad[i as usize]).sum();
    let hess_sum: f64 = rows.iter().map(|&i| hess[i as usize]).sum();
    let make_leaf = |nodes: &mut Vec<Node>| {
        nodes.push(Node::Leaf {
            value: leaf_value(grad_sum, hess_sum),
        });
        (nodes.len() - 1) as u32
    };
    if depth >= hp.max_depth || rows.len() < 2 * hp.min_leaf_count.max(1) {
        return make_leaf(nodes);
    }

    let in_node = {
        let mut mask = vec![false; features.len()];
        for &i in rows {
            mask[i as usize] = true;
        }
        mask
    };
    let parent_score = grad_sum * grad_sum / (hess_sum + LAMBDA);
    let mut best: Option<SplitChoice> = None;
    for (f, order) in sorted.iter().enumerate() {
        let mut left_grad = 0.0;
        let mut left_hess = 0.0;
        let mut left_count = 0usize;
        let node_rows: Vec<u32> = order
            .iter()
            .copied()
            .filter(|&i| in_node[i as usize])
            .collect();
        for w in 0..node_rows.len().saturating_sub(1) {
            let i = node_rows[w] as usize;
            left_grad += grad[i];
            left_hess += hess[i];
            left_count += 1;
            let here = features[i][f];
            let next = features[node_rows[w + 1] as usize][f];
            if here == next {
                continue;
            }
            let right_count = node_rows.len() - left_count;
            if left_count < hp.min_leaf_count || right_count < hp.min_leaf_count {
                continue;
            }
            let right_grad = grad_sum - left_grad;
            let right_hess = hess_sum - left_hess;
            let gain = left_grad * left_grad / (left_hess + LAMBDA)
                + right_grad * right_grad / (right_hess + LAMBDA)
                - parent_score;
            if gain > best.as_ref().map(|b| b.gain).unwrap_or(1e-12) {
                best = Some(SplitChoice {
                    feature: f as u32,
                    threshold: 0.5 * (here + next),
                    gain,
                });
            }
        }
    }

    let Some(choice) = best else {
        return make_leaf(nodes);
    };
    let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows
        .iter()
        .partition(|&&i| features[i as usize][choice.feature as usize] <= choice.threshold);
    let at = nodes.len();
    nodes.push(Node::Leaf { value: 0.0 }); // placeholder until children exist
    let left = grow(features, grad, hess, sorted, &left_rows, hp, depth + 1, nodes);
    let right = grow(features, grad, hess, sorted, &right_rows, hp, depth + 1, nodes);
    nodes[at] = Node::Split {
        feature: choice.feature,
        threshold: choice.threshold,
        left,
        right,
    };
    at as u32
}
