//! The six label-distribution evaluation measures: four distances
//! (Chebyshev, Clark, Canberra, KL divergence) and two similarities
//! (Cosine, Intersection).

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::distribution::{clip_into, LabelDistribution, KL_EPSILON};
use crate::error::{Error, Result};

/// Whether lower or higher values of a measure indicate a better prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Lower is better.
    Distance,
    /// Higher is better.
    Similarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Chebyshev,
    Clark,
    Canberra,
    #[serde(rename = "kl")]
    KLDivergence,
    Cosine,
    Intersection,
}

impl MetricKind {
    /// All measures in the conventional reporting order.
    pub const ALL: [MetricKind; 6] = [
        MetricKind::Chebyshev,
        MetricKind::Clark,
        MetricKind::Canberra,
        MetricKind::KLDivergence,
        MetricKind::Cosine,
        MetricKind::Intersection,
    ];

    pub fn orientation(self) -> Orientation {
        match self {
            MetricKind::Chebyshev
            | MetricKind::Clark
            | MetricKind::Canberra
            | MetricKind::KLDivergence => Orientation::Distance,
            MetricKind::Cosine | MetricKind::Intersection => Orientation::Similarity,
        }
    }

    pub fn is_distance(self) -> bool {
        self.orientation() == Orientation::Distance
    }

    /// True when `candidate` is strictly better than `reference`.
    pub fn is_better(self, candidate: f64, reference: f64) -> bool {
        match self.orientation() {
            Orientation::Distance => candidate < reference,
            Orientation::Similarity => candidate > reference,
        }
    }

    /// True when `candidate` is strictly worse than `reference`.
    pub fn is_worse(self, candidate: f64, reference: f64) -> bool {
        self.is_better(reference, candidate)
    }

    /// Short identifier used in config files and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Chebyshev => "chebyshev",
            MetricKind::Clark => "clark",
            MetricKind::Canberra => "canberra",
            MetricKind::KLDivergence => "kl",
            MetricKind::Cosine => "cosine",
            MetricKind::Intersection => "intersection",
        }
    }

    /// Human-readable label with the direction arrow used in result tables.
    pub fn label(self) -> &'static str {
        match self {
            MetricKind::Chebyshev => "Chebyshev ↓",
            MetricKind::Clark => "Clark ↓",
            MetricKind::Canberra => "Canberra ↓",
            MetricKind::KLDivergence => "KL div ↓",
            MetricKind::Cosine => "Cosine ↑",
            MetricKind::Intersection => "Intersection ↑",
        }
    }

    /// Scores `prediction` against `truth`. Both slices must have equal
    /// length; neither is validated as a distribution.
    pub fn compute(self, truth: &[f64], prediction: &[f64]) -> Result<f64> {
        if truth.len() != prediction.len() {
            return Err(Error::LengthMismatch {
                expected: truth.len(),
                found: prediction.len(),
            });
        }
        Ok(match self {
            MetricKind::Chebyshev => chebyshev(truth, prediction),
            MetricKind::Clark => clark(truth, prediction),
            MetricKind::Canberra => canberra(truth, prediction),
            MetricKind::KLDivergence => kl_divergence(truth, prediction),
            MetricKind::Cosine => cosine(truth, prediction),
            MetricKind::Intersection => intersection(truth, prediction),
        })
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "chebyshev" | "cheb" => Ok(MetricKind::Chebyshev),
            "clark" => Ok(MetricKind::Clark),
            "canberra" => Ok(MetricKind::Canberra),
            "kl" | "kl_divergence" | "kldivergence" | "kullback-leibler" => {
                Ok(MetricKind::KLDivergence)
            }
            "cosine" => Ok(MetricKind::Cosine),
            "intersection" => Ok(MetricKind::Intersection),
            other => Err(Error::ConfigInvalid(format!("unknown metric '{other}'"))),
        }
    }
}

fn chebyshev(d: &[f64], p: &[f64]) -> f64 {
    d.iter()
        .zip(p)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

fn clark(d: &[f64], p: &[f64]) -> f64 {
    d.iter()
        .zip(p)
        .map(|(a, b)| {
            let denom = a + b;
            if denom == 0.0 {
                0.0
            } else {
                let r = (a - b) / denom;
                r * r
            }
        })
        .sum::<f64>()
        .sqrt()
}

fn canberra(d: &[f64], p: &[f64]) -> f64 {
    d.iter()
        .zip(p)
        .map(|(a, b)| {
            let denom = a + b;
            if denom == 0.0 {
                0.0
            } else {
                (a - b).abs() / denom
            }
        })
        .sum()
}

fn kl_divergence(d: &[f64], p: &[f64]) -> f64 {
    let c = d.len();
    let mut dc = vec![0.0; c];
    let mut pc = vec![0.0; c];
    clip_into(d, KL_EPSILON, &mut dc);
    clip_into(p, KL_EPSILON, &mut pc);
    dc.iter().zip(&pc).map(|(a, b)| a * (a / b).ln()).sum()
}

fn cosine(d: &[f64], p: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut nd = 0.0;
    let mut np = 0.0;
    for (a, b) in d.iter().zip(p) {
        dot += a * b;
        nd += a * a;
        np += b * b;
    }
    let denom = nd.sqrt() * np.sqrt();
    if denom == 0.0 {
        0.0
    } else {
        dot / denom
    }
}

fn intersection(d: &[f64], p: &[f64]) -> f64 {
    d.iter().zip(p).map(|(a, b)| a.min(*b)).sum()
}

/// Scores one prediction against the ground truth. For the KL divergence both
/// arguments are floored at [`KL_EPSILON`] first; `truth` is the left argument.
pub fn evaluate(
    kind: MetricKind,
    truth: &LabelDistribution,
    prediction: &LabelDistribution,
) -> Result<f64> {
    kind.compute(truth.as_slice(), prediction.as_slice())
}

/// Per-sample scores and their arithmetic mean.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchScore {
    pub per_sample: Vec<f64>,
    pub mean: f64,
}

/// Row-wise [`evaluate`] over two `N×c` matrices.
pub fn evaluate_batch(
    kind: MetricKind,
    truths: ArrayView2<'_, f64>,
    predictions: ArrayView2<'_, f64>,
) -> Result<BatchScore> {
    if truths.dim() != predictions.dim() {
        return Err(Error::ShapeMismatch {
            expected: truths.dim(),
            found: predictions.dim(),
        });
    }
    let per_sample = truths
        .rows()
        .into_iter()
        .zip(predictions.rows())
        .map(|(t, p)| match (t.as_slice(), p.as_slice()) {
            (Some(t), Some(p)) => kind.compute(t, p),
            _ => kind.compute(&t.to_vec(), &p.to_vec()),
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = if per_sample.is_empty() {
        f64::NAN
    } else {
        per_sample.iter().sum::<f64>() / per_sample.len() as f64
    };
    Ok(BatchScore { per_sample, mean })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::strategy::Strategy as _;

    fn dist(v: &[f64]) -> LabelDistribution {
        LabelDistribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn identical_inputs() {
        let d = dist(&[0.2, 0.3, 0.5]);
        for kind in MetricKind::ALL {
            let v = evaluate(kind, &d, &d).unwrap();
            match kind.orientation() {
                Orientation::Distance => assert!(v.abs() < 1e-15, "{kind}: {v}"),
                Orientation::Similarity => assert!((v - 1.0).abs() < 1e-15, "{kind}: {v}"),
            }
        }
    }

    #[test]
    fn hand_values() {
        let v = evaluate(MetricKind::Chebyshev, &dist(&[1.0, 0.0]), &dist(&[0.5, 0.5])).unwrap();
        assert_eq!(v, 0.5);
        let v = evaluate(MetricKind::Canberra, &dist(&[0.8, 0.2]), &dist(&[0.2, 0.8])).unwrap();
        assert!((v - 1.2).abs() < 1e-12);
        let v = evaluate(MetricKind::Intersection, &dist(&[0.7, 0.3]), &dist(&[0.4, 0.6])).unwrap();
        assert!((v - 0.7).abs() < 1e-12);
    }

    #[test]
    fn clark_and_canberra_skip_zero_denominators() {
        let a = dist(&[0.0, 0.4, 0.6]);
        let b = dist(&[0.0, 0.6, 0.4]);
        let clark = evaluate(MetricKind::Clark, &a, &b).unwrap();
        assert!((clark - (0.08f64).sqrt()).abs() < 1e-12);
        let canberra = evaluate(MetricKind::Canberra, &a, &b).unwrap();
        assert!((canberra - 0.4).abs() < 1e-12);
    }

    #[test]
    fn kl_is_asymmetric_and_finite_on_zeros() {
        let a = dist(&[0.9, 0.1]);
        let b = dist(&[0.5, 0.5]);
        let ab = evaluate(MetricKind::KLDivergence, &a, &b).unwrap();
        let ba = evaluate(MetricKind::KLDivergence, &b, &a).unwrap();
        assert!((ab - ba).abs() > 1e-3);
        let z = evaluate(MetricKind::KLDivergence, &dist(&[0.5, 0.5]), &dist(&[1.0, 0.0])).unwrap();
        assert!(z.is_finite() && z > 0.0);
    }

    #[test]
    fn length_mismatch() {
        let err = MetricKind::Cosine.compute(&[0.5, 0.5], &[1.0, 0.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { expected: 2, found: 3 }));
    }

    #[test]
    fn batch_identical_kl() {
        let m = array![
            [0.1, 0.2, 0.3, 0.4],
            [0.25, 0.25, 0.25, 0.25],
            [0.7, 0.1, 0.1, 0.1]
        ];
        let s = evaluate_batch(MetricKind::KLDivergence, m.view(), m.view()).unwrap();
        assert_eq!(s.per_sample.len(), 3);
        assert!(s.per_sample.iter().all(|v| v.abs() < 1e-15));
        assert!(s.mean.abs() < 1e-15);
    }

    #[test]
    fn batch_chebyshev() {
        let t = array![[1.0, 0.0], [0.0, 1.0]];
        let p = array![[0.5, 0.5], [0.5, 0.5]];
        let s = evaluate_batch(MetricKind::Chebyshev, t.view(), p.view()).unwrap();
        assert_eq!(s.per_sample, vec![0.5, 0.5]);
        assert_eq!(s.mean, 0.5);
    }

    #[test]
    fn batch_cosine() {
        let t = array![[0.9, 0.1]];
        let p = array![[0.1, 0.9]];
        let s = evaluate_batch(MetricKind::Cosine, t.view(), p.view()).unwrap();
        // 0.18 / 0.82
        assert!((s.mean - 0.18 / 0.82).abs() < 1e-12);
        assert!((s.mean - 0.2195).abs() < 1e-4);
    }

    #[test]
    fn batch_shape_mismatch() {
        let t = array![[0.9, 0.1]];
        let p = array![[0.1, 0.9], [0.5, 0.5]];
        assert!(matches!(
            evaluate_batch(MetricKind::Cosine, t.view(), p.view()),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn parse_names() {
        for kind in MetricKind::ALL {
            assert_eq!(kind.name().parse::<MetricKind>().unwrap(), kind);
        }
        assert!("euclid".parse::<MetricKind>().is_err());
        assert_eq!(MetricKind::ALL.iter().filter(|k| k.is_distance()).count(), 4);
    }

    fn simplex(raw: Vec<f64>) -> Vec<f64> {
        let sum: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / sum).collect()
    }

    proptest::proptest! {
        #[test]
        fn symmetric_except_kl(
            pair in (2usize..10).prop_flat_map(|c| (
                proptest::collection::vec(0.01f64..1.0, c),
                proptest::collection::vec(0.01f64..1.0, c),
            )),
        ) {
            let (d, p) = (simplex(pair.0), simplex(pair.1));
            for kind in MetricKind::ALL {
                if kind == MetricKind::KLDivergence {
                    continue;
                }
                let ab = kind.compute(&d, &p).unwrap();
                let ba = kind.compute(&p, &d).unwrap();
                proptest::prop_assert!((ab - ba).abs() <= 1e-12, "{kind}: {ab} vs {ba}");
            }
        }

        #[test]
        fn identity_of_indiscernibles(
            pair in (2usize..10).prop_flat_map(|c| (
                proptest::collection::vec(0.01f64..1.0, c),
                proptest::collection::vec(0.01f64..1.0, c),
            )),
        ) {
            let (d, p) = (simplex(pair.0), simplex(pair.1));
            let differs = d.iter().zip(&p).any(|(a, b)| (a - b).abs() > 1e-6);
            for kind in MetricKind::ALL {
                let same = kind.compute(&d, &d).unwrap();
                let other = kind.compute(&d, &p).unwrap();
                if kind.is_distance() {
                    proptest::prop_assert!(same.abs() <= 1e-12);
                    proptest::prop_assert!(other >= 0.0);
                    if differs {
                        proptest::prop_assert!(other > 0.0);
                    }
                } else {
                    proptest::prop_assert!((same - 1.0).abs() <= 1e-12);
                    proptest::prop_assert!(other <= 1.0 + 1e-12);
                    if differs {
                        proptest::prop_assert!(other < 1.0);
                    }
                }
            }
        }
    }
}
