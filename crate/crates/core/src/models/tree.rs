use serde::{Deserialize, Serialize};

use super::sigmoid;

/// Binary decision tree in struct-of-arrays form. Node 0 is the root.
///
/// A node is a leaf when `feature[i] < 0`. Internal nodes send `x` left when
/// `x[feature] < threshold`. `cover` is the number of training rows (with
/// bootstrap multiplicity) that reached the node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub feature: Vec<i32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
    pub cover: Vec<f64>,
    pub gain: Vec<f64>,
}

impl Tree {
    pub fn empty() -> Self {
        Self {
            feature: Vec::new(),
            threshold: Vec::new(),
            left: Vec::new(),
            right: Vec::new(),
            value: Vec::new(),
            cover: Vec::new(),
            gain: Vec::new(),
        }
    }

    /// A single-leaf tree.
    pub fn leaf(value: f64, cover: f64) -> Self {
        let mut t = Self::empty();
        t.push_leaf(value, cover);
        t
    }

    pub fn push_leaf(&mut self, value: f64, cover: f64) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.cover.push(cover);
        self.gain.push(0.0);
        self.feature.len() - 1
    }

    /// Turn leaf `node` into a split with the given children.
    pub fn set_split(&mut self, node: usize, feature: usize, threshold: f64, left: usize, right: usize, gain: f64) {
        self.feature[node] = feature as i32;
        self.threshold[node] = threshold;
        self.left[node] = left as u32;
        self.right[node] = right as u32;
        self.gain[node] = gain;
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }

    pub fn is_leaf(&self, node: usize) -> bool {
        self.feature[node] < 0
    }

    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut node = 0;
        while !self.is_leaf(node) {
            let f = self.feature[node] as usize;
            node = if x[f] < self.threshold[node] {
                self.left[node] as usize
            } else {
                self.right[node] as usize
            };
        }
        node
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.value[self.leaf_index(x)]
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, node: usize) -> usize {
            if t.is_leaf(node) {
                0
            } else {
                1 + walk(t, t.left[node] as usize).max(walk(t, t.right[node] as usize))
            }
        }
        if self.n_nodes() == 0 {
            0
        } else {
            walk(self, 0)
        }
    }

    /// Largest feature index used by any split, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.feature.iter().filter(|&&f| f >= 0).map(|&f| f as usize).max()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combine {
    /// `sigmoid(base + scale * sum(tree outputs))`.
    AdditiveLogit,
    /// `base + scale * sum(tree outputs)` read directly as a probability.
    ProbabilityAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub trees: Vec<Tree>,
    pub base_score: f64,
    pub combine: Combine,
    /// Multiplier applied to every tree output: the learning rate for
    /// boosting, `1 / n_trees` for forests.
    pub tree_scale: f64,
}

impl TreeEnsemble {
    pub fn new(trees: Vec<Tree>, base_score: f64, combine: Combine, tree_scale: f64) -> Self {
        Self {
            trees,
            base_score,
            combine,
            tree_scale,
        }
    }

    /// Output in the additive space the trees live in.
    pub fn raw_output(&self, x: &[f64]) -> f64 {
        self.base_score + self.tree_scale * self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict_proba(&self, x: &[f64]) -> f64 {
        let raw = self.raw_output(x);
        match self.combine {
            Combine::AdditiveLogit => sigmoid(raw),
            Combine::ProbabilityAverage => raw.clamp(0.0, 1.0),
        }
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(Tree::depth).max().unwrap_or(0)
    }
}
