//! Plot-ready summaries of a trained cascade: how enhanced features
//! correlate across layers, how far enhancers are from their ideal pattern
//! scores, and how the mean KL divergence evolves layer by layer.

use ndarray::{Array2, ArrayView2};

use crate::enhancement::{pattern_scores, PatternBasis};
use crate::error::{Error, Result};

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va == 0.0 || vb == 0.0 {
        0.0
    } else {
        (cov / (va * vb).sqrt()).clamp(-1.0, 1.0)
    }
}

/// `L×L` Pearson correlations between the flattened enhanced-feature
/// matrices of every pair of layers. The diagonal is 1; a constant matrix
/// correlates 0 with the others.
pub fn layer_correlation(enhanced: &[ArrayView2<'_, f64>]) -> Result<Array2<f64>> {
    let Some(first) = enhanced.first() else {
        return Err(Error::EmptyInput);
    };
    if first.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(bad) = enhanced.iter().find(|e| e.dim() != first.dim()) {
        return Err(Error::ShapeMismatch {
            expected: first.dim(),
            found: bad.dim(),
        });
    }
    let flat: Vec<Vec<f64>> = enhanced.iter().map(|e| e.iter().copied().collect()).collect();
    let l = flat.len();
    let mut out = Array2::eye(l);
    for i in 0..l {
        for j in (i + 1)..l {
            let r = pearson(&flat[i], &flat[j]);
            out[[i, j]] = r;
            out[[j, i]] = r;
        }
    }
    Ok(out)
}

/// Mean absolute difference, per pattern, between enhanced features and the
/// ideal scores `D v_j`.
pub fn enhancer_abs_error(
    enhanced: ArrayView2<'_, f64>,
    labels: ArrayView2<'_, f64>,
    basis: &PatternBasis,
) -> Result<Vec<f64>> {
    let ideal = pattern_scores(labels, basis)?;
    if ideal.dim() != enhanced.dim() {
        return Err(Error::ShapeMismatch {
            expected: ideal.dim(),
            found: enhanced.dim(),
        });
    }
    if enhanced.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    let n = enhanced.nrows() as f64;
    Ok(enhanced
        .columns()
        .into_iter()
        .zip(ideal.columns())
        .map(|(e, s)| e.iter().zip(s).map(|(a, b)| (a - b).abs()).sum::<f64>() / n)
        .collect())
}
