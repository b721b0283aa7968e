use ndarray::{Array1, Array2, Axis};
use rand::Rng as _;
use rand::seq::index::sample;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::LdlDataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from};

/// Features each latent factor depends on.
const FACTOR_SUPPORT: usize = 4;
/// Scale of the noise-free logits.
const LOGIT_SCALE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_labels: usize,
    /// Number of latent factors; fewer factors than labels makes the label
    /// columns correlated.
    pub k_true: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::ConfigInvalid(m));
        if self.n_samples == 0 || self.n_features == 0 {
            return fail("synthetic data needs at least one sample and one feature".into());
        }
        if self.n_labels < 2 {
            return fail("synthetic data needs at least two labels".into());
        }
        if self.k_true == 0 || self.k_true > self.n_labels {
            return fail(format!(
                "k_true must be in 1..={}, got {}",
                self.n_labels, self.k_true
            ));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return fail("noise_sigma must be finite and nonnegative".into());
        }
        Ok(())
    }
}

/// Draws a dataset whose labels are a softmax of a low-rank linear function
/// of the features plus Gaussian logit noise.
///
/// Features are uniform on `[0, 1)`. Each of the `k_true` latent factors is a
/// standardized sparse linear combination of a few features, and a Gaussian
/// `k_true×c` mixing matrix turns the factors into logits.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<LdlDataset> {
    spec.validate()?;
    let (n, d, c, k) = (spec.n_samples, spec.n_features, spec.n_labels, spec.k_true);

    let mut structure = rng_from(derive_seed(spec.seed, &[0]));
    let support = FACTOR_SUPPORT.min(d);
    let mut weights = Array2::<f64>::zeros((d, k));
    for j in 0..k {
        for i in sample(&mut structure, d, support) {
            weights[[i, j]] = StandardNormal.sample(&mut structure);
        }
    }
    let mixing = Array2::from_shape_simple_fn((k, c), || StandardNormal.sample(&mut structure));

    let mut draws = rng_from(derive_seed(spec.seed, &[1]));
    let features = Array2::from_shape_simple_fn((n, d), || draws.random::<f64>());
    let mut noise = rng_from(derive_seed(spec.seed, &[2]));

    // a uniform feature has variance 1/12
    let spread: Array1<f64> = weights
        .axis_iter(Axis(1))
        .map(|w| (w.dot(&w) / 12.0).sqrt().max(f64::MIN_POSITIVE))
        .collect();
    let mut factors = (&features - 0.5).dot(&weights);
    factors /= &spread;

    let mut labels = factors.dot(&mixing) * LOGIT_SCALE;
    for mut row in labels.rows_mut() {
        for v in row.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut noise);
            *v += spec.noise_sigma * e;
        }
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    LdlDataset::new(features, labels)
}
