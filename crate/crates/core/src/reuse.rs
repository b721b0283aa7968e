//! Measure-aware feature reuse.
//!
//! Samples whose per-sample metric got worse from one layer to the next are
//! "degraded". Among those, the ones worse than the degraded-set mean `tau`
//! keep their previous-layer feature rows instead of the new ones.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricKind;

/// Outcome of comparing two consecutive layers' per-sample metric values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReuseDecision {
    /// Samples that got worse, ascending.
    pub degraded: Vec<usize>,
    /// Degraded samples strictly worse than `tau`, ascending.
    pub reused: Vec<usize>,
    /// Mean current-layer value over `degraded`; `None` when nothing degraded.
    pub tau: Option<f64>,
    pub metric: MetricKind,
}

pub fn select_reuse_set(m_prev: &[f64], m_curr: &[f64], metric: MetricKind) -> Result<ReuseDecision> {
    if m_prev.len() != m_curr.len() {
        return Err(Error::LengthMismatch {
            expected: m_prev.len(),
            found: m_curr.len(),
        });
    }
    let degraded: Vec<usize> = (0..m_curr.len())
        .filter(|&s| metric.is_worse(m_curr[s], m_prev[s]))
        .collect();
    if degraded.is_empty() {
        return Ok(ReuseDecision {
            degraded,
            reused: Vec::new(),
            tau: None,
            metric,
        });
    }
    let tau = degraded.iter().map(|&s| m_curr[s]).sum::<f64>() / degraded.len() as f64;
    let reused = degraded
        .iter()
        .copied()
        .filter(|&s| metric.is_worse(m_curr[s], tau))
        .collect();
    Ok(ReuseDecision {
        degraded,
        reused,
        tau: Some(tau),
        metric,
    })
}

/// Copy of `f_new` with the rows in `reuse_set` taken from `g_prev`.
pub fn apply_reuse(
    f_new: ArrayView2<'_, f64>,
    g_prev: ArrayView2<'_, f64>,
    reuse_set: &[usize],
) -> Result<Array2<f64>> {
    if f_new.dim() != g_prev.dim() {
        return Err(Error::ShapeMismatch {
            expected: f_new.dim(),
            found: g_prev.dim(),
        });
    }
    let n = f_new.nrows();
    if let Some(&index) = reuse_set.iter().find(|&&s| s >= n) {
        return Err(Error::IndexOutOfRange { index, len: n });
    }
    let mut out = f_new.to_owned();
    for &s in reuse_set {
        out.row_mut(s).assign(&g_prev.row(s));
    }
    Ok(out)
}

/// Label-free reuse screening at prediction time.
///
/// Each sample is scored by the metric between the previous layer's
/// prediction (as the reference) and the current one, and compared against
/// the threshold stored during training.
pub fn inference_reuse_set(
    h_prev: ArrayView2<'_, f64>,
    h_curr: ArrayView2<'_, f64>,
    tau: Option<f64>,
    metric: MetricKind,
) -> Result<Vec<usize>> {
    if h_prev.dim() != h_curr.dim() {
        return Err(Error::ShapeMismatch {
            expected: h_prev.dim(),
            found: h_curr.dim(),
        });
    }
    let Some(tau) = tau else {
        return Ok(Vec::new());
    };
    let mut out = Vec::new();
    for (s, (prev, curr)) in h_prev.rows().into_iter().zip(h_curr.rows()).enumerate() {
        let prev = prev.to_vec();
        let curr = curr.to_vec();
        let score = metric.compute(&prev, &curr)?;
        if metric.is_worse(score, tau) {
            out.push(s);
        }
    }
    Ok(out)
}
