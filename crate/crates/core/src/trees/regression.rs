use ndarray::{Array1, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::builder::{grow, ColumnMajor, Criterion, GrowParams};
use super::struct_tree::check_inputs;
use super::{FeatureSubsample, SplitMode, Tree};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};

pub type RegressionTree = Tree<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub feature_subsample: FeatureSubsample,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for RegressionForestParams {
    fn default() -> Self {
        RegressionForestParams {
            n_trees: 20,
            max_depth: 10,
            min_leaf: 2,
            feature_subsample: FeatureSubsample::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl RegressionForestParams {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::ConfigInvalid("a forest needs at least one tree".into()));
        }
        if self.max_depth < 1 || self.min_leaf < 1 {
            return Err(Error::ConfigInvalid(
                "max_depth and min_leaf must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Sum of squared deviations from the node mean.
struct VarianceCriterion<'a> {
    targets: ArrayView1<'a, f64>,
}

impl Criterion for VarianceCriterion<'_> {
    type Leaf = f64;

    fn width(&self) -> usize {
        2
    }

    fn scratch_len(&self) -> usize {
        0
    }

    #[inline]
    fn add(&self, stats: &mut [f64], sample: usize) {
        let y = self.targets[sample];
        stats[0] += y;
        stats[1] += y * y;
    }

    #[inline]
    fn cost(&self, stats: &[f64], count: usize, _scratch: &mut [f64]) -> f64 {
        (stats[1] - stats[0] * stats[0] / count as f64).max(0.0)
    }

    fn tolerance(&self, stats: &[f64], count: usize) -> f64 {
        let mean = stats[0] / count as f64;
        1e-12 * count as f64 * (1.0 + mean * mean)
    }

    fn leaf(&self, stats: &[f64], count: usize) -> f64 {
        stats[0] / count as f64
    }
}

/// Scalar random forest; the prediction is the mean over trees of the leaf
/// mean target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionForest {
    params: RegressionForestParams,
    n_features: usize,
    trees: Vec<RegressionTree>,
}

pub fn fit_regression_forest(
    x: ArrayView2<'_, f64>,
    targets: ArrayView1<'_, f64>,
    params: &RegressionForestParams,
) -> Result<RegressionForest> {
    params.validate()?;
    check_inputs(x, targets.len())?;
    if let Some(index) = targets.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let n = x.nrows();
    let columns = ColumnMajor::from_view(x);
    let criterion = VarianceCriterion { targets };
    let grow_params = GrowParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        max_features: params.feature_subsample.count(x.ncols()),
        split_mode: SplitMode::Exhaustive,
        shuffle_features: params.feature_subsample != FeatureSubsample::All,
    };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from(derive_seed(params.seed, &[t as u64]));
            let samples: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(&columns, &criterion, samples, grow_params, &mut rng)
        })
        .collect();
    Ok(RegressionForest {
        params: params.clone(),
        n_features: x.ncols(),
        trees,
    })
}

impl RegressionForest {
    pub fn fit(
        x: ArrayView2<'_, f64>,
        targets: ArrayView1<'_, f64>,
        params: &RegressionForestParams,
    ) -> Result<Self> {
        fit_regression_forest(x, targets, params)
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn params(&self) -> &RegressionForestParams {
        &self.params
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        if x.ncols() != self.n_features {
            return Err(Error::ShapeMismatch {
                expected: (x.nrows(), self.n_features),
                found: x.dim(),
            });
        }
        let mut out = Array1::zeros(x.nrows());
        let inv = 1.0 / self.trees.len() as f64;
        Zip::from(&mut out)
            .and(x.axis_iter(Axis(0)))
            .par_for_each(|o, row| {
                let owned;
                let row = match row.as_slice() {
                    Some(r) => r,
                    None => {
                        owned = row.to_vec();
                        &owned
                    }
                };
                let sum: f64 = self.trees.iter().map(|t| *t.leaf_unchecked(row).0).sum();
                *o = sum * inv;
            });
        Ok(out)
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        if self.trees.is_empty() {
            return Err("regression forest has no trees".into());
        }
        for tree in &self.trees {
            if tree.n_features() != self.n_features {
                return Err("tree feature count differs from forest".into());
            }
            tree.validate(|v| v.is_finite())?;
        }
        Ok(())
    }
}
