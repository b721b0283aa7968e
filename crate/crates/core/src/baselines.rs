//! Reference predictors: k-nearest-neighbour label averaging and the global
//! mean distribution.

use ndarray::{Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::dataset::LdlDataset;
use crate::distribution::LabelDistribution;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k_neighbors: usize,
    /// Minkowski order.
    pub p: f64,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams {
            k_neighbors: 5,
            p: 2.0,
        }
    }
}

/// Minkowski distance raised to the power `p`; the root does not change the
/// neighbour order.
fn powered_distance(a: &[f64], b: &[f64], p: f64) -> f64 {
    if p == 2.0 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
    } else if p == 1.0 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    } else {
        a.iter().zip(b).map(|(x, y)| (x - y).abs().powf(p)).sum()
    }
}

/// For each query row, the mean label distribution of its `k` nearest
/// training rows. Equal distances are broken by the lower training index.
pub fn aaknn_predict(
    train: &LdlDataset,
    queries: ArrayView2<'_, f64>,
    params: &KnnParams,
) -> Result<Array2<f64>> {
    let k = params.k_neighbors;
    if k == 0 {
        return Err(Error::ConfigInvalid("k_neighbors must be at least 1".into()));
    }
    if !(params.p >= 1.0 && params.p.is_finite()) {
        return Err(Error::ConfigInvalid("Minkowski order must be at least 1".into()));
    }
    let n = train.n_samples();
    if k > n {
        return Err(Error::KTooLarge { k, n });
    }
    if queries.ncols() != train.n_features() {
        return Err(Error::DimMismatch {
            expected: train.n_features(),
            found: queries.ncols(),
        });
    }
    let features = train.features().as_standard_layout().into_owned();
    let labels = train.labels();
    let mut out = Array2::zeros((queries.nrows(), train.n_labels()));
    Zip::from(out.axis_iter_mut(Axis(0)))
        .and(queries.axis_iter(Axis(0)))
        .par_for_each(|mut o, q| {
            let q = q.to_vec();
            let mut scored: Vec<(f64, usize)> = features
                .rows()
                .into_iter()
                .enumerate()
                .map(|(i, row)| {
                    let row = row.as_slice().expect("standard layout");
                    (powered_distance(&q, row, params.p), i)
                })
                .collect();
            let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < n {
                scored.select_nth_unstable_by(k - 1, order);
            }
            for &(_, i) in &scored[..k] {
                o += &labels.row(i);
            }
            o /= k as f64;
        });
    Ok(out)
}

/// Column mean of the training labels.
pub fn mean_predictor(train: &LdlDataset) -> LabelDistribution {
    let mean = train.labels().mean_axis(Axis(0)).expect("datasets are nonempty");
    LabelDistribution::new(mean.to_vec()).expect("a mean of distributions is a distribution")
}
