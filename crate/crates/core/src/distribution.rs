//! Label distributions: simplex-valued vectors of description degrees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on the entry sum of a valid distribution.
pub const SUM_TOLERANCE: f64 = 1e-6;

/// Largest deviation from 1 that opt-in renormalization will repair.
pub const RENORMALIZE_WINDOW: f64 = 1e-3;

/// Floor applied to both arguments of the KL divergence.
pub const KL_EPSILON: f64 = 1e-7;

/// A length-`c` vector of nonnegative description degrees summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LabelDistribution(Vec<f64>);

impl LabelDistribution {
    /// Validates `values` without renormalizing.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        validate_distribution(&values, false)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Uniform distribution over `c` labels.
    pub fn uniform(c: usize) -> Result<Self> {
        if c < 2 {
            return Err(Error::TooFewLabels { len: c });
        }
        Ok(LabelDistribution(vec![1.0 / c as f64; c]))
    }
}

impl TryFrom<Vec<f64>> for LabelDistribution {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        LabelDistribution::new(values)
    }
}

impl From<LabelDistribution> for Vec<f64> {
    fn from(d: LabelDistribution) -> Self {
        d.0
    }
}

impl AsRef<[f64]> for LabelDistribution {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Checks the simplex constraints on `values`.
///
/// With `renormalize` set, a nonnegative vector whose sum lies within
/// [`RENORMALIZE_WINDOW`] of one is divided by its sum instead of rejected.
pub fn validate_distribution(values: &[f64], renormalize: bool) -> Result<LabelDistribution> {
    if values.len() < 2 {
        return Err(Error::TooFewLabels { len: values.len() });
    }
    for (index, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { index });
        }
        if v < 0.0 {
            return Err(Error::NegativeEntry { index, value: v });
        }
    }
    let sum: f64 = values.iter().sum();
    let deviation = (sum - 1.0).abs();
    if deviation <= SUM_TOLERANCE && !renormalize {
        return Ok(LabelDistribution(values.to_vec()));
    }
    if renormalize && deviation <= RENORMALIZE_WINDOW {
        return Ok(LabelDistribution(values.iter().map(|v| v / sum).collect()));
    }
    Err(Error::SumOutOfTolerance { sum })
}

/// Lifts every entry to at least `epsilon` and rescales the remaining
/// entries so the result sums to one.
///
/// Entries that end up below `epsilon` after rescaling are pinned as well, so
/// the loop runs at most `c` times.
pub fn clip_and_renormalize(values: &[f64], epsilon: f64) -> Result<LabelDistribution> {
    if values.len() < 2 {
        return Err(Error::TooFewLabels { len: values.len() });
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let mut out = vec![0.0; values.len()];
    clip_into(values, epsilon, &mut out);
    Ok(LabelDistribution(out))
}

/// Allocation-free core of [`clip_and_renormalize`]. `values` must be finite.
pub(crate) fn clip_into(values: &[f64], epsilon: f64, out: &mut [f64]) {
    let c = values.len();
    debug_assert_eq!(c, out.len());
    if epsilon * c as f64 >= 1.0 {
        out.fill(1.0 / c as f64);
        return;
    }
    // Fast path: nothing to clip, plain renormalization.
    if values.iter().all(|&v| v >= epsilon) {
        let sum: f64 = values.iter().sum();
        let scale = 1.0 / sum;
        if values.iter().all(|&v| v * scale >= epsilon) {
            for (o, &v) in out.iter_mut().zip(values) {
                *o = v * scale;
            }
            return;
        }
    }

    // out[i] < 0 marks an entry pinned at epsilon.
    out.copy_from_slice(values);
    loop {
        let mut pinned = 0usize;
        let mut free_sum = 0.0;
        for &v in out.iter() {
            if v < 0.0 {
                pinned += 1;
            } else {
                free_sum += v;
            }
        }
        if pinned == c || free_sum <= 0.0 {
            out.fill(1.0 / c as f64);
            return;
        }
        let scale = (1.0 - pinned as f64 * epsilon) / free_sum;
        let mut newly = false;
        for o in out.iter_mut() {
            if *o >= 0.0 && *o * scale < epsilon {
                *o = -1.0;
                newly = true;
            }
        }
        if !newly {
            for o in out.iter_mut() {
                *o = if *o < 0.0 { epsilon } else { *o * scale };
            }
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_symmetric_pair() {
        let d = validate_distribution(&[0.5, 0.5], false).unwrap();
        assert_eq!(d.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn rejects_sum_above_window() {
        let err = validate_distribution(&[0.6, 0.5], false).unwrap_err();
        assert!(matches!(err, Error::SumOutOfTolerance { .. }));
        let err = validate_distribution(&[0.6, 0.5], true).unwrap_err();
        assert!(matches!(err, Error::SumOutOfTolerance { .. }));
    }

    #[test]
    fn accepts_movie_example() {
        let v = [0.03, 0.24, 0.21, 0.4, 0.03, 0.09];
        assert!(validate_distribution(&v, false).is_ok());
    }

    #[test]
    fn rejects_negative_and_nonfinite() {
        assert!(matches!(
            validate_distribution(&[1.2, -0.2], false),
            Err(Error::NegativeEntry { index: 1, .. })
        ));
        assert!(matches!(
            validate_distribution(&[f64::NAN, 1.0], false),
            Err(Error::NonFinite { index: 0 })
        ));
        assert!(matches!(
            validate_distribution(&[1.0], false),
            Err(Error::TooFewLabels { len: 1 })
        ));
    }

    #[test]
    fn renormalizes_inside_window() {
        let d = validate_distribution(&[0.5, 0.5005], true).unwrap();
        let sum: f64 = d.as_slice().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(validate_distribution(&[0.5, 0.5005], false).is_err());
    }

    #[test]
    fn clip_lifts_single_zero() {
        let d = clip_and_renormalize(&[1.0, 0.0], 1e-7).unwrap();
        let v = d.as_slice();
        assert_eq!(v[1], 1e-7);
        assert!((v[0] - (1.0 - 1e-7)).abs() < 1e-15);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clip_is_identity_above_floor() {
        let d = clip_and_renormalize(&[0.5, 0.5], 1e-7).unwrap();
        assert_eq!(d.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn clip_two_zeros() {
        // Reference computed with 50-digit decimal arithmetic:
        // pinned entries 1e-6, free entry 1 - 2e-6 = 0.999998.
        let d = clip_and_renormalize(&[0.0, 0.0, 1.0], 1e-6).unwrap();
        let v = d.as_slice();
        assert_eq!(v[0], 1e-6);
        assert_eq!(v[1], 1e-6);
        assert!((v[2] - 0.999998).abs() < 1e-15);
    }

    #[test]
    fn clip_cascades_when_rescaling_pushes_below_floor() {
        // 1e-6 is at the floor but the rescale (1 - 1e-6) would push it under
        let eps = 1e-6;
        let d = clip_and_renormalize(&[0.0, eps, 1.0 - eps], eps).unwrap();
        assert!(d.as_slice().iter().all(|&v| v >= eps));
        assert!((d.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clip_all_zero_gives_uniform() {
        let d = clip_and_renormalize(&[0.0, 0.0, 0.0], 1e-7).unwrap();
        for &v in d.as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn clip_rejects_nonfinite() {
        assert!(matches!(
            clip_and_renormalize(&[f64::INFINITY, 0.0], 1e-7),
            Err(Error::NonFinite { index: 0 })
        ));
    }

    #[test]
    fn serde_validates() {
        let ok: LabelDistribution = serde_json::from_str("[0.25,0.75]").unwrap();
        assert_eq!(ok.len(), 2);
        assert!(serde_json::from_str::<LabelDistribution>("[0.25,0.8]").is_err());
    }

    proptest::proptest! {
        #[test]
        fn clip_output_is_a_distribution(
            values in proptest::collection::vec(
                proptest::prop_oneof![proptest::strategy::Just(0.0), 0.0f64..1.0],
                2..12,
            ),
            exponent in 2i32..9,
        ) {
            let epsilon = 10f64.powi(-exponent);
            let out = clip_and_renormalize(&values, epsilon).unwrap();
            let sum: f64 = out.as_slice().iter().sum();
            proptest::prop_assert!((sum - 1.0).abs() <= 1e-12);
            proptest::prop_assert!(out.as_slice().iter().all(|&v| v >= epsilon));
            proptest::prop_assert!(validate_distribution(out.as_slice(), false).is_ok());
        }
    }
}
