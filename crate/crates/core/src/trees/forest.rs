use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::builder::{grow, ColumnMajor};
use super::struct_tree::{check_inputs, KlCriterion};
use super::{FeatureSubsample, SplitMode, StructTree, StructTreeParams};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForestKind {
    /// Exhaustive thresholds, bootstrap rows by default.
    RandomForest,
    /// One random threshold per candidate feature, full sample by default.
    ExtraTrees,
}

impl ForestKind {
    pub fn split_mode(self) -> SplitMode {
        match self {
            ForestKind::RandomForest => SplitMode::Exhaustive,
            ForestKind::ExtraTrees => SplitMode::RandomThreshold,
        }
    }

    pub fn abbreviation(self) -> &'static str {
        match self {
            ForestKind::RandomForest => "RF",
            ForestKind::ExtraTrees => "ERF",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub kind: ForestKind,
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub feature_subsample: FeatureSubsample,
    /// Bootstrap the rows of every tree.
    pub bagging: bool,
    pub seed: u64,
}

impl ForestParams {
    /// 100 trees of depth at most 10 with at least 2 samples per leaf.
    /// Random forests bootstrap; extra-trees forests see every row.
    pub fn new(kind: ForestKind) -> Self {
        ForestParams {
            kind,
            n_trees: 100,
            max_depth: 10,
            min_leaf: 2,
            feature_subsample: FeatureSubsample::Sqrt,
            bagging: kind == ForestKind::RandomForest,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn tree_params(&self, tree_index: usize) -> StructTreeParams {
        StructTreeParams {
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            feature_subsample: self.feature_subsample,
            split_mode: self.kind.split_mode(),
            seed: derive_seed(self.seed, &[tree_index as u64]),
        }
    }
}

/// An ensemble of distribution trees; predictions are the mean of the trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructForest {
    params: ForestParams,
    n_features: usize,
    n_labels: usize,
    trees: Vec<StructTree>,
}

/// Trains `params.n_trees` distribution trees, in parallel, each from its
/// own derived seed.
pub fn fit_forest(
    x: ArrayView2<'_, f64>,
    labels: ArrayView2<'_, f64>,
    params: &ForestParams,
) -> Result<StructForest> {
    if params.n_trees == 0 {
        return Err(Error::ConfigInvalid("a forest needs at least one tree".into()));
    }
    params.tree_params(0).validate()?;
    check_inputs(x, labels.nrows())?;
    let n = x.nrows();
    let columns = ColumnMajor::from_view(x);
    let criterion = KlCriterion::new(labels);
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let tree_params = params.tree_params(t);
            let mut rng = rng_from(tree_params.seed);
            let samples: Vec<usize> = if params.bagging {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(
                &columns,
                &criterion,
                samples,
                tree_params.grow_params(x.ncols()),
                &mut rng,
            )
        })
        .collect();
    Ok(StructForest {
        params: params.clone(),
        n_features: x.ncols(),
        n_labels: labels.ncols(),
        trees,
    })
}

impl StructForest {
    pub fn fit(
        x: ArrayView2<'_, f64>,
        labels: ArrayView2<'_, f64>,
        params: &ForestParams,
    ) -> Result<Self> {
        fit_forest(x, labels, params)
    }

    pub fn kind(&self) -> ForestKind {
        self.params.kind
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn trees(&self) -> &[StructTree] {
        &self.trees
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    /// Row-wise mean of the tree predictions, `M×c`.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::ShapeMismatch {
                expected: (x.nrows(), self.n_features),
                found: x.dim(),
            });
        }
        let mut out = Array2::zeros((x.nrows(), self.n_labels));
        let inv = 1.0 / self.trees.len() as f64;
        Zip::from(out.axis_iter_mut(Axis(0)))
            .and(x.axis_iter(Axis(0)))
            .par_for_each(|mut o, row| {
                let owned;
                let row = match row.as_slice() {
                    Some(r) => r,
                    None => {
                        owned = row.to_vec();
                        &owned
                    }
                };
                for tree in &self.trees {
                    let (leaf, _) = tree.leaf_unchecked(row);
                    for (acc, v) in o.iter_mut().zip(leaf) {
                        *acc += v;
                    }
                }
                o.mapv_inplace(|v| v * inv);
            });
        Ok(out)
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        if self.trees.is_empty() {
            return Err("forest has no trees".into());
        }
        for tree in &self.trees {
            if tree.n_features() != self.n_features {
                return Err("tree feature count differs from forest".into());
            }
            tree.validate(|leaf| {
                leaf.len() == self.n_labels && leaf.iter().all(|v| v.is_finite() && *v >= 0.0)
            })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn homogeneous_labels() {
        let x = array![[0.0, 1.0], [1.0, 0.0], [2.0, 2.0], [3.0, 1.0]];
        let y = array![[0.4, 0.6], [0.4, 0.6], [0.4, 0.6], [0.4, 0.6]];
        for kind in [ForestKind::RandomForest, ForestKind::ExtraTrees] {
            let mut params = ForestParams::new(kind);
            params.n_trees = 10;
            let forest = fit_forest(x.view(), y.view(), &params).unwrap();
            assert!(forest.trees().iter().all(|t| t.nodes().len() == 1));
            let p = forest.predict(array![[9.0, 9.0]].view()).unwrap();
            assert!((p[[0, 0]] - 0.4).abs() < 1e-12);
            assert!((p[[0, 1]] - 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_without_bagging() {
        let x = array![[0.0], [1.0]];
        let y = array![[1.0, 0.0], [0.0, 1.0]];
        let mut params = ForestParams::new(ForestKind::RandomForest);
        params.n_trees = 8;
        params.min_leaf = 1;
        params.bagging = false;
        let forest = fit_forest(x.view(), y.view(), &params).unwrap();
        let p = forest.predict(x.view()).unwrap();
        assert!((p[[0, 0]] - 1.0).abs() < 1e-9 && p[[0, 1]].abs() < 1e-9);
        assert!((p[[1, 1]] - 1.0).abs() < 1e-9 && p[[1, 0]].abs() < 1e-9);
    }

    #[test]
    fn same_seed_same_forest() {
        let x = array![[0.0, 0.3], [1.0, 0.1], [2.0, 0.7], [3.0, 0.2], [4.0, 0.9], [5.0, 0.5]];
        let y = array![
            [0.9, 0.1],
            [0.8, 0.2],
            [0.5, 0.5],
            [0.4, 0.6],
            [0.1, 0.9],
            [0.2, 0.8]
        ];
        let mut params = ForestParams::new(ForestKind::RandomForest).with_seed(42);
        params.n_trees = 5;
        params.min_leaf = 1;
        let a = fit_forest(x.view(), y.view(), &params).unwrap();
        let b = fit_forest(x.view(), y.view(), &params).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        params.seed = 43;
        let c = fit_forest(x.view(), y.view(), &params).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn two_trees_average() {
        // forest of two hand-built single-leaf trees
        let forest = StructForest {
            params: ForestParams::new(ForestKind::RandomForest),
            n_features: 1,
            n_labels: 2,
            trees: vec![
                StructTree::from_nodes(
                    1,
                    vec![super::super::Node::Leaf {
                        value: vec![1.0, 0.0],
                        samples: 1,
                    }],
                ),
                StructTree::from_nodes(
                    1,
                    vec![super::super::Node::Leaf {
                        value: vec![0.0, 1.0],
                        samples: 1,
                    }],
                ),
            ],
        };
        let p = forest.predict(array![[0.0]].view()).unwrap();
        assert_eq!(p, array![[0.5, 0.5]]);
    }

    #[test]
    fn predict_shape_mismatch() {
        let x = array![[0.0], [1.0]];
        let y = array![[1.0, 0.0], [0.0, 1.0]];
        let mut params = ForestParams::new(ForestKind::ExtraTrees);
        params.n_trees = 2;
        let forest = fit_forest(x.view(), y.view(), &params).unwrap();
        assert!(matches!(
            forest.predict(array![[0.0, 1.0]].view()),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
