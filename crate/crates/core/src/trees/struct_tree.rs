use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::builder::{grow, ColumnMajor, Criterion, GrowParams};
use super::{FeatureSubsample, SplitMode, Tree};
use crate::distribution::{clip_into, KL_EPSILON};
use crate::error::{Error, Result};
use crate::rng::rng_from;

/// A tree whose leaves predict whole label distributions.
pub type StructTree = Tree<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructTreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub feature_subsample: FeatureSubsample,
    pub split_mode: SplitMode,
    pub seed: u64,
}

impl Default for StructTreeParams {
    fn default() -> Self {
        StructTreeParams {
            max_depth: 10,
            min_leaf: 2,
            feature_subsample: FeatureSubsample::Sqrt,
            split_mode: SplitMode::Exhaustive,
            seed: 0,
        }
    }
}

impl StructTreeParams {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::ConfigInvalid("max_depth must be at least 1".into()));
        }
        if self.min_leaf < 1 {
            return Err(Error::ConfigInvalid("min_leaf must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn grow_params(&self, n_features: usize) -> GrowParams {
        GrowParams {
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            max_features: self.feature_subsample.count(n_features),
            split_mode: self.split_mode,
            shuffle_features: self.feature_subsample != FeatureSubsample::All,
        }
    }
}

/// Mean KL divergence of member distributions to their mean.
///
/// Per-sample terms (floored copies of each row and their negative
/// entropies) are computed once, so the impurity of any sample set follows
/// from sums in O(c):
/// `sum_s KL(d_s || m) = sum_s sum_j d_sj ln d_sj - sum_j (sum_s d_sj) ln m_j`.
pub(crate) struct KlCriterion {
    c: usize,
    raw: Vec<f64>,
    clipped: Vec<f64>,
    negent: Vec<f64>,
}

impl KlCriterion {
    pub(crate) fn new(labels: ArrayView2<'_, f64>) -> Self {
        let (n, c) = labels.dim();
        let mut raw = Vec::with_capacity(n * c);
        for row in labels.rows() {
            raw.extend(row.iter().copied());
        }
        let mut clipped = vec![0.0; n * c];
        let mut negent = vec![0.0; n];
        for i in 0..n {
            let out = &mut clipped[i * c..(i + 1) * c];
            clip_into(&raw[i * c..(i + 1) * c], KL_EPSILON, out);
            negent[i] = out.iter().map(|v| v * v.ln()).sum();
        }
        KlCriterion {
            c,
            raw,
            clipped,
            negent,
        }
    }
}

impl Criterion for KlCriterion {
    type Leaf = Vec<f64>;

    fn width(&self) -> usize {
        2 * self.c + 1
    }

    fn scratch_len(&self) -> usize {
        2 * self.c
    }

    #[inline]
    fn add(&self, stats: &mut [f64], sample: usize) {
        let c = self.c;
        let raw = &self.raw[sample * c..(sample + 1) * c];
        let clipped = &self.clipped[sample * c..(sample + 1) * c];
        for j in 0..c {
            stats[j] += raw[j];
            stats[c + j] += clipped[j];
        }
        stats[2 * c] += self.negent[sample];
    }

    #[inline]
    fn cost(&self, stats: &[f64], count: usize, scratch: &mut [f64]) -> f64 {
        let c = self.c;
        let (mean, floored) = scratch.split_at_mut(c);
        let inv = 1.0 / count as f64;
        for j in 0..c {
            mean[j] = stats[j] * inv;
        }
        clip_into(mean, KL_EPSILON, floored);
        let cross: f64 = (0..c).map(|j| stats[c + j] * floored[j].ln()).sum();
        (stats[2 * c] - cross).max(0.0)
    }

    fn tolerance(&self, _stats: &[f64], count: usize) -> f64 {
        1e-12 * count as f64
    }

    fn leaf(&self, stats: &[f64], count: usize) -> Vec<f64> {
        let inv = 1.0 / count as f64;
        stats[..self.c].iter().map(|v| v * inv).collect()
    }
}

/// `(1/m) * sum_s KL(d_s || mean)` over the `m` rows, with the KL floor
/// applied to both arguments.
pub fn node_impurity(label_rows: ArrayView2<'_, f64>) -> Result<f64> {
    let (m, c) = label_rows.dim();
    if m == 0 {
        return Err(Error::EmptyInput);
    }
    if c < 2 {
        return Err(Error::ShapeMismatch {
            expected: (m, 2),
            found: (m, c),
        });
    }
    let criterion = KlCriterion::new(label_rows);
    let mut stats = vec![0.0; criterion.width()];
    for s in 0..m {
        criterion.add(&mut stats, s);
    }
    let mut scratch = vec![0.0; criterion.scratch_len()];
    Ok(criterion.cost(&stats, m, &mut scratch) / m as f64)
}

pub(crate) fn check_inputs(x: ArrayView2<'_, f64>, rows: usize) -> Result<()> {
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(Error::EmptyInput);
    }
    if x.nrows() != rows {
        return Err(Error::ShapeMismatch {
            expected: (rows, x.ncols()),
            found: x.dim(),
        });
    }
    Ok(())
}

/// Fits one distribution tree on every row of `x`.
pub fn fit_struct_tree(
    x: ArrayView2<'_, f64>,
    labels: ArrayView2<'_, f64>,
    params: &StructTreeParams,
) -> Result<StructTree> {
    params.validate()?;
    check_inputs(x, labels.nrows())?;
    let columns = ColumnMajor::from_view(x);
    let criterion = KlCriterion::new(labels);
    let mut rng = rng_from(params.seed);
    Ok(grow(
        &columns,
        &criterion,
        (0..x.nrows()).collect(),
        params.grow_params(x.ncols()),
        &mut rng,
    ))
}

impl StructTree {
    /// Distribution stored at the leaf reached by `x`.
    pub fn predict(&self, x: &[f64]) -> Result<&[f64]> {
        self.leaf(x).map(|(v, _)| v.as_slice())
    }
}
