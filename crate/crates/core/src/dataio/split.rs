use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::LdlDataset;
use crate::error::{Error, Result};
use crate::rng::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        SplitSpec {
            seed,
            ..Default::default()
        }
    }
}

/// Shuffled train and test row indices. The train part has
/// `ceil(fraction * n)` rows, kept below `n` so the test part is never empty.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::ConfigInvalid(format!(
            "train fraction {} is not in (0, 1)",
            spec.train_fraction
        )));
    }
    if n < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: n,
        });
    }
    // the small slack keeps products like 0.8 * 10 from rounding up
    let n_train = ((spec.train_fraction * n as f64) - 1e-9).ceil() as usize;
    let n_train = n_train.clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(spec.seed));
    let test = order.split_off(n_train);
    Ok((order, test))
}

pub fn split(dataset: &LdlDataset, spec: &SplitSpec) -> Result<(LdlDataset, LdlDataset)> {
    let (train, test) = split_indices(dataset.n_samples(), spec)?;
    Ok((dataset.select(&train)?, dataset.select(&test)?))
}
