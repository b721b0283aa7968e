use ndarray::{Array2, ArrayView2, Axis};

use crate::distribution::{validate_distribution, LabelDistribution};
use crate::error::{Error, Result};

/// `N×d` features paired with `N×c` label distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct LdlDataset {
    features: Array2<f64>,
    labels: Array2<f64>,
    feature_names: Option<Vec<String>>,
    label_names: Option<Vec<String>>,
}

impl LdlDataset {
    /// Builds a dataset, checking shapes, finiteness and every label row.
    pub fn new(features: Array2<f64>, labels: Array2<f64>) -> Result<Self> {
        Self::with_renormalize(features, labels, false)
    }

    /// As [`LdlDataset::new`]; with `renormalize` set, label rows within the
    /// renormalization window are rescaled to sum to one.
    pub fn with_renormalize(
        features: Array2<f64>,
        mut labels: Array2<f64>,
        renormalize: bool,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 || d == 0 {
            return Err(Error::EmptyInput);
        }
        if labels.nrows() != n {
            return Err(Error::ShapeMismatch {
                expected: (n, labels.ncols()),
                found: labels.dim(),
            });
        }
        if labels.ncols() < 2 {
            return Err(Error::TooFewLabels {
                len: labels.ncols(),
            });
        }
        if let Some(index) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        for (row, mut values) in labels.rows_mut().into_iter().enumerate() {
            let checked = validate_distribution(&values.to_vec(), renormalize).map_err(|e| {
                Error::InvalidDistribution {
                    row,
                    reason: e.to_string(),
                }
            })?;
            for (dst, src) in values.iter_mut().zip(checked.as_slice()) {
                *dst = *src;
            }
        }
        Ok(LdlDataset {
            features,
            labels,
            feature_names: None,
            label_names: None,
        })
    }

    pub fn with_names(mut self, feature_names: Vec<String>, label_names: Vec<String>) -> Self {
        self.feature_names = Some(feature_names);
        self.label_names = Some(label_names);
        self
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> ArrayView2<'_, f64> {
        self.labels.view()
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn label_names(&self) -> Option<&[String]> {
        self.label_names.as_deref()
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.ncols()
    }

    /// Label distribution of sample `i`.
    pub fn label(&self, i: usize) -> LabelDistribution {
        LabelDistribution::new(self.labels.row(i).to_vec())
            .expect("rows are validated on construction")
    }

    /// Subset of rows, in the given order. Indices may repeat.
    pub fn select(&self, rows: &[usize]) -> Result<LdlDataset> {
        if let Some(&index) = rows.iter().find(|&&r| r >= self.n_samples()) {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.n_samples(),
            });
        }
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        Ok(LdlDataset {
            features: self.features.select(Axis(0), rows),
            labels: self.labels.select(Axis(0), rows),
            feature_names: self.feature_names.clone(),
            label_names: self.label_names.clone(),
        })
    }

    pub fn into_parts(self) -> (Array2<f64>, Array2<f64>) {
        (self.features, self.labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn validates_shapes_and_rows() {
        let x = array![[1.0], [2.0]];
        assert!(LdlDataset::new(x.clone(), array![[0.5, 0.5], [1.0, 0.0]]).is_ok());
        assert!(matches!(
            LdlDataset::new(x.clone(), array![[0.5, 0.5]]),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            LdlDataset::new(x.clone(), array![[0.5, 0.5], [0.7, 0.7]]),
            Err(Error::InvalidDistribution { row: 1, .. })
        ));
        assert!(matches!(
            LdlDataset::new(x, array![[1.0], [1.0]]),
            Err(Error::TooFewLabels { .. })
        ));
        assert!(matches!(
            LdlDataset::new(array![[f64::NAN], [0.0]], array![[0.5, 0.5], [1.0, 0.0]]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn select_rows() {
        let ds = LdlDataset::new(array![[1.0], [2.0], [3.0]], array![[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]])
            .unwrap();
        let sub = ds.select(&[2, 0]).unwrap();
        assert_eq!(sub.features(), array![[3.0], [1.0]]);
        assert_eq!(sub.label(0).as_slice(), &[0.0, 1.0]);
        assert!(ds.select(&[3]).is_err());
    }
}
