//! Feature enhancement from label correlation.
//!
//! The Pearson correlation matrix of the label columns is decomposed into
//! its leading eigenvectors ("relationship patterns"). Each sample's label
//! row projected onto pattern `j` gives an ideal score `s_j = D v_j`, and a
//! regression forest (an "enhancer") learns to predict that score from the
//! features, since labels are unavailable at prediction time.

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::rng::derive_seed;
use crate::trees::{fit_regression_forest, RegressionForest, RegressionForestParams};

/// Pearson correlation between label columns; symmetric with unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix(Array2<f64>);

impl CorrelationMatrix {
    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// Label correlation matrix. A constant label column correlates 0 with every
/// other column; the diagonal is exactly 1.
pub fn correlation_matrix(labels: ArrayView2<'_, f64>) -> Result<CorrelationMatrix> {
    let (n, c) = labels.dim();
    if n < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            found: n,
        });
    }
    let mean = labels.mean_axis(Axis(0)).expect("n >= 2");
    let centered = &labels - &mean;
    let constant: Vec<bool> = labels
        .columns()
        .into_iter()
        .map(|col| {
            let first = col[0];
            col.iter().all(|&v| v == first)
        })
        .collect();
    let ss: Vec<f64> = centered
        .columns()
        .into_iter()
        .map(|col| col.iter().map(|v| v * v).sum())
        .collect();

    let mut r = Array2::<f64>::eye(c);
    for i in 0..c {
        for j in (i + 1)..c {
            let value = if constant[i] || constant[j] || ss[i] == 0.0 || ss[j] == 0.0 {
                0.0
            } else {
                let cov: f64 = centered
                    .column(i)
                    .iter()
                    .zip(centered.column(j))
                    .map(|(a, b)| a * b)
                    .sum();
                (cov / (ss[i] * ss[j]).sqrt()).clamp(-1.0, 1.0)
            };
            r[[i, j]] = value;
            r[[j, i]] = value;
        }
    }
    Ok(CorrelationMatrix(r))
}

/// Leading eigenvectors of a correlation matrix, one pattern per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternBasis {
    vectors: Array2<f64>,
    eigenvalues: Vec<f64>,
}

impl PatternBasis {
    /// `c×k` matrix whose columns are the patterns.
    pub fn vectors(&self) -> &Array2<f64> {
        &self.vectors
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn k(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn n_labels(&self) -> usize {
        self.vectors.nrows()
    }
}

/// Top-`k` eigenvectors of `correlation` by descending (signed) eigenvalue.
///
/// `k` larger than `c` is clamped. Each vector is signed so that its
/// largest-magnitude entry is positive (lowest index on exact ties), and
/// equal eigenvalues keep the solver's column order, so the result is
/// deterministic.
pub fn extract_patterns(correlation: &CorrelationMatrix, k: usize) -> Result<PatternBasis> {
    if k == 0 {
        return Err(Error::ConfigInvalid("k must be at least 1".into()));
    }
    let c = correlation.dim();
    let k = if k > c {
        log::warn!("requested {k} patterns from a {c}x{c} correlation matrix; using {c}");
        c
    } else {
        k
    };
    let (values, vectors) = symmetric_eigen(correlation.values())?;
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));

    let mut basis = Array2::<f64>::zeros((c, k));
    let mut eigenvalues = Vec::with_capacity(k);
    for (dst, &src) in order.iter().take(k).enumerate() {
        let col = vectors.column(src);
        let mut pivot = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        basis.column_mut(dst).assign(&col.mapv(|v| sign * v));
        eigenvalues.push(values[src]);
    }
    Ok(PatternBasis {
        vectors: basis,
        eigenvalues,
    })
}

/// Ideal pattern scores `D V`, one column per pattern.
pub fn pattern_scores(labels: ArrayView2<'_, f64>, basis: &PatternBasis) -> Result<Array2<f64>> {
    if labels.ncols() != basis.n_labels() {
        return Err(Error::ShapeMismatch {
            expected: (labels.nrows(), basis.n_labels()),
            found: labels.dim(),
        });
    }
    Ok(labels.dot(&basis.vectors))
}

/// `k` trained enhancers plus the patterns they were trained against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnhancerSet {
    basis: PatternBasis,
    enhancers: Vec<RegressionForest>,
    input_dim: usize,
}

impl EnhancerSet {
    pub fn basis(&self) -> &PatternBasis {
        &self.basis
    }

    pub fn enhancers(&self) -> &[RegressionForest] {
        &self.enhancers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn k(&self) -> usize {
        self.enhancers.len()
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        transform(x, self)
    }

    pub(crate) fn validate(&self) -> std::result::Result<(), String> {
        if self.enhancers.len() != self.basis.k() {
            return Err("enhancer count differs from pattern count".into());
        }
        for e in &self.enhancers {
            if e.n_features() != self.input_dim {
                return Err("enhancer input width differs from the set".into());
            }
            e.validate()?;
        }
        Ok(())
    }
}

/// Learns patterns from `labels` and trains one regression forest per
/// pattern score on `x`.
pub fn fit_enhancers(
    x: ArrayView2<'_, f64>,
    labels: ArrayView2<'_, f64>,
    k: usize,
    params: &RegressionForestParams,
) -> Result<EnhancerSet> {
    if x.nrows() != labels.nrows() {
        return Err(Error::ShapeMismatch {
            expected: (labels.nrows(), x.ncols()),
            found: x.dim(),
        });
    }
    let correlation = correlation_matrix(labels)?;
    let basis = extract_patterns(&correlation, k)?;
    let scores = pattern_scores(labels, &basis)?;
    fit_enhancers_with_basis(x, scores.view(), basis, params)
}

/// Trains enhancers against precomputed pattern scores (`N×k`, one column
/// per pattern of `basis`).
pub fn fit_enhancers_with_basis(
    x: ArrayView2<'_, f64>,
    scores: ArrayView2<'_, f64>,
    basis: PatternBasis,
    params: &RegressionForestParams,
) -> Result<EnhancerSet> {
    if scores.ncols() != basis.k() || scores.nrows() != x.nrows() {
        return Err(Error::ShapeMismatch {
            expected: (x.nrows(), basis.k()),
            found: scores.dim(),
        });
    }
    let enhancers = (0..basis.k())
        .into_par_iter()
        .map(|j| {
            let p = RegressionForestParams {
                seed: derive_seed(params.seed, &[j as u64]),
                ..params.clone()
            };
            fit_regression_forest(x, scores.column(j), &p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnhancerSet {
        basis,
        enhancers,
        input_dim: x.ncols(),
    })
}

/// Predicted pattern scores, `M×k`. Labels are not consulted.
pub fn transform(x: ArrayView2<'_, f64>, set: &EnhancerSet) -> Result<Array2<f64>> {
    if x.ncols() != set.input_dim {
        return Err(Error::DimMismatch {
            expected: set.input_dim,
            found: x.ncols(),
        });
    }
    let mut out = Array2::zeros((x.nrows(), set.k()));
    for (j, enhancer) in set.enhancers.iter().enumerate() {
        out.column_mut(j).assign(&enhancer.predict(x)?);
    }
    Ok(out)
}
