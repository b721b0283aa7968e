//! Decision trees and forests.
//!
//! Two leaf payloads share one greedy builder: distribution trees, whose
//! leaves hold the mean label distribution of their samples and whose splits
//! minimise the mean KL divergence to that mean, and scalar regression trees
//! split on variance reduction.

mod builder;
mod forest;
mod regression;
mod struct_tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use forest::{fit_forest, ForestKind, ForestParams, StructForest};
pub use regression::{
    fit_regression_forest, RegressionForest, RegressionForestParams, RegressionTree,
};
pub use struct_tree::{fit_struct_tree, node_impurity, StructTree, StructTreeParams};

/// How many features each node considers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubsample {
    /// `max(1, floor(sqrt(p)))` features per node.
    #[default]
    Sqrt,
    /// Every feature at every node.
    All,
}

impl FeatureSubsample {
    pub fn count(self, n_features: usize) -> usize {
        match self {
            FeatureSubsample::Sqrt => ((n_features as f64).sqrt().floor() as usize).max(1),
            FeatureSubsample::All => n_features,
        }
        .min(n_features)
    }
}

/// How split thresholds are proposed for a candidate feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Every midpoint between consecutive distinct values (random forest).
    #[default]
    Exhaustive,
    /// One uniform threshold in `[min, max)` (extremely randomized trees).
    RandomThreshold,
}

/// A tree node. Trees are stored as flat node lists in preorder; child
/// indices always point past their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node<L> {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: L,
        samples: usize,
    },
}

/// A fitted binary tree with leaf payload `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<L> {
    n_features: usize,
    nodes: Vec<Node<L>>,
}

impl<L> Tree<L> {
    pub(crate) fn from_nodes(n_features: usize, nodes: Vec<Node<L>>) -> Self {
        Tree { n_features, nodes }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn nodes(&self) -> &[Node<L>] {
        &self.nodes
    }

    /// Leaf reached by `x`; values `<= threshold` go left.
    pub fn leaf(&self, x: &[f64]) -> Result<(&L, usize)> {
        if x.len() != self.n_features {
            return Err(Error::LengthMismatch {
                expected: self.n_features,
                found: x.len(),
            });
        }
        Ok(self.leaf_unchecked(x))
    }

    #[inline]
    pub(crate) fn leaf_unchecked(&self, x: &[f64]) -> (&L, usize) {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
                Node::Leaf { value, samples } => return (value, *samples),
            }
        }
    }

    /// Number of splits on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut max = 0;
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = node {
                depth[*left] = depth[i] + 1;
                depth[*right] = depth[i] + 1;
                max = max.max(depth[i] + 1);
            }
        }
        max
    }

    pub fn leaves(&self) -> impl Iterator<Item = (&L, usize)> {
        self.nodes.iter().filter_map(|n| match n {
            Node::Leaf { value, samples } => Some((value, *samples)),
            Node::Split { .. } => None,
        })
    }

    pub fn n_leaves(&self) -> usize {
        self.leaves().count()
    }

    /// Structural checks for trees read from disk.
    pub(crate) fn validate(&self, leaf_ok: impl Fn(&L) -> bool) -> std::result::Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let mut referenced = vec![false; self.nodes.len()];
        referenced[0] = true;
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= self.n_features {
                        return Err(format!("node {i}: feature {feature} out of range"));
                    }
                    if !threshold.is_finite() {
                        return Err(format!("node {i}: non-finite threshold"));
                    }
                    for &child in [left, right] {
                        if child <= i || child >= self.nodes.len() {
                            return Err(format!("node {i}: bad child index {child}"));
                        }
                        if referenced[child] {
                            return Err(format!("node {child} has two parents"));
                        }
                        referenced[child] = true;
                    }
                }
                Node::Leaf { value, .. } => {
                    if !leaf_ok(value) {
                        return Err(format!("node {i}: invalid leaf payload"));
                    }
                }
            }
        }
        if referenced.iter().any(|r| !r) {
            return Err("tree contains unreachable nodes".into());
        }
        Ok(())
    }
}
