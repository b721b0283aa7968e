//! Layered training and best-layer inference.
//!
//! Each layer trains random forests and extra-trees forests on its input and
//! produces out-of-fold predictions `H`. With enhancement on, enhancers
//! trained on `[X, H]` add pattern-score features `E`; with reuse on, rows of
//! samples that degraded past the layer threshold are replaced by the
//! previous layer's rows. The next layer sees `[X, G]`.

mod config;
pub mod diagnostics;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LdlDataset;
use crate::enhancement::{
    correlation_matrix, extract_patterns, fit_enhancers_with_basis, pattern_scores, EnhancerSet,
    PatternBasis,
};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_batch, MetricKind};
use crate::reuse::{apply_reuse, inference_reuse_set, select_reuse_set, ReuseDecision};
use crate::rng::{derive_seed, rng_from};
use crate::trees::{fit_forest, StructForest};

pub use config::{CascadeConfig, EnhancerSettings, ForestSettings, InferenceReuse, Variant};

const STREAM_FOLDS: u64 = 1;
const STREAM_FOREST: u64 = 2;
const STREAM_ENHANCER: u64 = 3;

/// One trained cascade layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    /// Forests refit on the full layer input, in slot order.
    pub forests: Vec<StructForest>,
    pub enhancers: Option<EnhancerSet>,
    /// Reuse threshold; `None` at layer 0, with reuse off, or when no
    /// sample degraded.
    pub tau: Option<f64>,
    pub mean_stop_metric: f64,
    pub reuse_set_size: usize,
    pub input_width: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeModel {
    pub config: CascadeConfig,
    pub input_dim: usize,
    pub n_labels: usize,
    pub initial_enhancers: Option<EnhancerSet>,
    pub layers: Vec<LayerRecord>,
    pub best_layer: usize,
}

/// Training-time intermediates of one layer.
#[derive(Debug, Clone)]
pub struct LayerDiagnostics {
    pub layer: usize,
    pub input_width: usize,
    /// Out-of-fold forest predictions, `N×(F·c)`.
    pub h: Array2<f64>,
    /// Row-wise mean of the forest blocks of `h`.
    pub layer_eval: Array2<f64>,
    /// Enhanced features, `N×k` (`N×0` with enhancement off).
    pub enhanced: Array2<f64>,
    /// New features after reuse.
    pub g: Array2<f64>,
    pub stop_scores: Vec<f64>,
    pub mean_stop_metric: f64,
    pub reuse_scores: Vec<f64>,
    pub reuse: Option<ReuseDecision>,
}

/// Prediction-time intermediates of one layer.
#[derive(Debug, Clone)]
pub struct LayerOutput {
    pub h: Array2<f64>,
    pub layer_eval: Array2<f64>,
    pub enhanced: Array2<f64>,
    pub g: Array2<f64>,
    pub reused: Vec<usize>,
}

/// Mean and per-sample scores of one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub metric: MetricKind,
    pub mean: f64,
    pub per_sample: Vec<f64>,
}

/// Seeded fold index per sample; balanced to within one sample.
fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if n < folds {
        return Err(Error::TooFewSamples {
            required: folds,
            found: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from(derive_seed(seed, &[STREAM_FOLDS])));
    let mut fold = vec![0; n];
    for (i, &s) in order.iter().enumerate() {
        fold[s] = i % folds;
    }
    Ok(fold)
}

fn forest_seed(config: &CascadeConfig, layer: usize, slot: usize, fold: usize) -> u64 {
    derive_seed(
        config.rng_seed,
        &[STREAM_FOREST, layer as u64, slot as u64, fold as u64],
    )
}

fn enhancer_seed(config: &CascadeConfig, stage: usize, fold: usize) -> u64 {
    derive_seed(config.rng_seed, &[STREAM_ENHANCER, stage as u64, fold as u64])
}

/// Enhancers fit on all rows for prediction, plus enhanced features for the
/// training rows computed out of fold. In-sample enhancer outputs would
/// carry the training labels into the next layer's input.
fn cross_fit_enhancers(
    x: ArrayView2<'_, f64>,
    scores: ArrayView2<'_, f64>,
    basis: &PatternBasis,
    config: &CascadeConfig,
    folds: &[usize],
    stage: usize,
) -> Result<(EnhancerSet, Array2<f64>)> {
    let k = config.oof_folds;
    let parts = (0..=k)
        .into_par_iter()
        .map(|fold| {
            let params = config.enhancer.params(enhancer_seed(config, stage, fold));
            if fold == k {
                let set = fit_enhancers_with_basis(x, scores, basis.clone(), &params)?;
                return Ok((set, Vec::new(), None));
            }
            let (held, train): (Vec<usize>, Vec<usize>) =
                (0..x.nrows()).partition(|&i| folds[i] == fold);
            let set = fit_enhancers_with_basis(
                x.select(Axis(0), &train).view(),
                scores.select(Axis(0), &train).view(),
                basis.clone(),
                &params,
            )?;
            let e = set.transform(x.select(Axis(0), &held).view())?;
            Ok((set, held, Some(e)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut enhanced = Array2::zeros((x.nrows(), basis.k()));
    let mut full = None;
    for (set, held, e) in parts {
        match e {
            Some(e) => {
                for (row, &i) in held.iter().enumerate() {
                    enhanced.row_mut(i).assign(&e.row(row));
                }
            }
            None => full = Some(set),
        }
    }
    Ok((full.expect("the full fit is always present"), enhanced))
}

fn block_mean(h: &Array2<f64>, n_forests: usize, n_labels: usize) -> Array2<f64> {
    let mut sum = h.slice(s![.., 0..n_labels]).to_owned();
    for f in 1..n_forests {
        sum += &h.slice(s![.., f * n_labels..(f + 1) * n_labels]);
    }
    sum / n_forests as f64
}

fn hstack(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    concatenate(Axis(1), &[a, b]).expect("row counts agree")
}

/// Out-of-fold predictions of every forest slot of layer `layer`, plus their
/// row-wise mean.
pub fn oof_predictions(
    x: ArrayView2<'_, f64>,
    labels: ArrayView2<'_, f64>,
    config: &CascadeConfig,
    layer: usize,
) -> Result<(Array2<f64>, Array2<f64>)> {
    config.validate()?;
    let folds = fold_assignment(x.nrows(), config.oof_folds, config.rng_seed)?;
    oof_with_folds(x, labels, config, layer, &folds)
}

fn oof_with_folds(
    x: ArrayView2<'_, f64>,
    labels: ArrayView2<'_, f64>,
    config: &CascadeConfig,
    layer: usize,
    folds: &[usize],
) -> Result<(Array2<f64>, Array2<f64>)> {
    if labels.nrows() != x.nrows() {
        return Err(Error::ShapeMismatch {
            expected: (x.nrows(), labels.ncols()),
            found: labels.dim(),
        });
    }
    let c = labels.ncols();
    let kinds = config.forest_kinds();
    let k = config.oof_folds;
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..k)
        .map(|fold| {
            let (held, train): (Vec<usize>, Vec<usize>) =
                (0..x.nrows()).partition(|&i| folds[i] == fold);
            (train, held)
        })
        .collect();
    let data: Vec<_> = splits
        .iter()
        .map(|(train, held)| {
            (
                x.select(Axis(0), train),
                labels.select(Axis(0), train),
                x.select(Axis(0), held),
            )
        })
        .collect();
    let jobs: Vec<(usize, usize)> = (0..kinds.len())
        .flat_map(|slot| (0..k).map(move |fold| (slot, fold)))
        .collect();
    let blocks = jobs
        .par_iter()
        .map(|&(slot, fold)| {
            let (tx, ty, hx) = &data[fold];
            let params = config.forest_params(kinds[slot], forest_seed(config, layer, slot, fold));
            fit_forest(tx.view(), ty.view(), &params)?.predict(hx.view())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut h = Array2::zeros((x.nrows(), kinds.len() * c));
    for (&(slot, fold), block) in jobs.iter().zip(&blocks) {
        for (row, &i) in splits[fold].1.iter().enumerate() {
            h.slice_mut(s![i, slot * c..(slot + 1) * c])
                .assign(&block.row(row));
        }
    }
    let eval = block_mean(&h, kinds.len(), c);
    Ok((h, eval))
}

fn refit_forests(
    x: ArrayView2<'_, f64>,
    labels: ArrayView2<'_, f64>,
    config: &CascadeConfig,
    layer: usize,
) -> Result<Vec<StructForest>> {
    let kinds = config.forest_kinds();
    kinds
        .par_iter()
        .enumerate()
        .map(|(slot, &kind)| {
            let seed = forest_seed(config, layer, slot, config.oof_folds);
            fit_forest(x, labels, &config.forest_params(kind, seed))
        })
        .collect()
}

/// Trains a cascade on `dataset`, returning the model and per-layer
/// training diagnostics.
pub fn fit_cascade(
    dataset: &LdlDataset,
    config: &CascadeConfig,
) -> Result<(CascadeModel, Vec<LayerDiagnostics>)> {
    config.validate()?;
    let x = dataset.features();
    let labels = dataset.labels();
    let n = dataset.n_samples();
    let folds = fold_assignment(n, config.oof_folds, config.rng_seed)?;

    let patterns = if config.enable_enhancement {
        let basis = extract_patterns(&correlation_matrix(labels)?, config.k_patterns)?;
        let scores = pattern_scores(labels, &basis)?;
        Some((basis, scores))
    } else {
        None
    };

    let (initial_enhancers, mut input) = if let Some((basis, scores)) = &patterns {
        let (set, e) = cross_fit_enhancers(x, scores.view(), basis, config, &folds, 0)?;
        (Some(set), hstack(x, e.view()))
    } else {
        (None, x.to_owned())
    };

    let mut layers = Vec::new();
    let mut diagnostics = Vec::new();
    let mut g_prev: Option<Array2<f64>> = None;
    let mut scores_prev: Option<Vec<f64>> = None;
    let mut best_layer = 0;
    let mut best_value = f64::NAN;
    let mut misses = 0;

    for layer in 0..config.layers_max {
        let input_width = input.ncols();
        let (h, layer_eval) = oof_with_folds(input.view(), labels, config, layer, &folds)?;
        let forests = refit_forests(input.view(), labels, config, layer)?;

        let (enhancers, enhanced) = if let Some((basis, scores)) = &patterns {
            let xh = hstack(x, h.view());
            let (set, e) =
                cross_fit_enhancers(xh.view(), scores.view(), basis, config, &folds, layer + 1)?;
            (Some(set), e)
        } else {
            (None, Array2::zeros((n, 0)))
        };
        let f_new = hstack(h.view(), enhanced.view());

        let stop = evaluate_batch(config.stop_metric, labels, layer_eval.view())?;
        let reuse_scores = if config.reuse_metric == config.stop_metric {
            stop.per_sample.clone()
        } else {
            evaluate_batch(config.reuse_metric, labels, layer_eval.view())?.per_sample
        };

        let (g, decision) = match (&g_prev, &scores_prev) {
            (Some(g_prev), Some(prev)) if config.enable_reuse => {
                let decision = select_reuse_set(prev, &reuse_scores, config.reuse_metric)?;
                let g = apply_reuse(f_new.view(), g_prev.view(), &decision.reused)?;
                (g, Some(decision))
            }
            _ => (f_new, None),
        };

        log::info!(
            "layer {layer}: mean {} {:.6}, reused {}",
            config.stop_metric.name(),
            stop.mean,
            decision.as_ref().map_or(0, |d| d.reused.len())
        );

        layers.push(LayerRecord {
            forests,
            enhancers,
            tau: decision.as_ref().and_then(|d| d.tau),
            mean_stop_metric: stop.mean,
            reuse_set_size: decision.as_ref().map_or(0, |d| d.reused.len()),
            input_width,
        });

        let improved = layer == 0 || {
            let margin = config.min_improvement;
            if config.stop_metric.is_distance() {
                stop.mean < best_value - margin
            } else {
                stop.mean > best_value + margin
            }
        };
        if improved {
            best_layer = layer;
            best_value = stop.mean;
            misses = 0;
        } else {
            misses += 1;
        }

        input = hstack(x, g.view());
        diagnostics.push(LayerDiagnostics {
            layer,
            input_width,
            h,
            layer_eval,
            enhanced,
            g: g.clone(),
            stop_scores: stop.per_sample,
            mean_stop_metric: stop.mean,
            reuse_scores: reuse_scores.clone(),
            reuse: decision,
        });
        g_prev = Some(g);
        scores_prev = Some(reuse_scores);

        if misses > config.early_stop_tolerance {
            break;
        }
    }

    let model = CascadeModel {
        config: config.clone(),
        input_dim: dataset.n_features(),
        n_labels: dataset.n_labels(),
        initial_enhancers,
        layers,
        best_layer,
    };
    Ok((model, diagnostics))
}

impl CascadeModel {
    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    /// Best-layer prediction, `M×c`.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let mut trace = self.run(x, self.best_layer)?;
        Ok(trace.pop().expect("at least one layer").layer_eval)
    }

    /// Outputs of every recorded layer, not just up to the best one.
    pub fn predict_trace(&self, x: ArrayView2<'_, f64>) -> Result<Vec<LayerOutput>> {
        self.run(x, self.layers.len() - 1)
    }

    fn run(&self, x: ArrayView2<'_, f64>, last: usize) -> Result<Vec<LayerOutput>> {
        if x.ncols() != self.input_dim {
            return Err(Error::DimMismatch {
                expected: self.input_dim,
                found: x.ncols(),
            });
        }
        let config = &self.config;
        let m = x.nrows();
        let c = self.n_labels;
        let mut input = match &self.initial_enhancers {
            Some(set) => hstack(x, set.transform(x)?.view()),
            None => x.to_owned(),
        };
        let mut out: Vec<LayerOutput> = Vec::with_capacity(last + 1);
        for (l, layer) in self.layers.iter().enumerate().take(last + 1) {
            let mut h = Array2::zeros((m, layer.forests.len() * c));
            for (slot, forest) in layer.forests.iter().enumerate() {
                h.slice_mut(s![.., slot * c..(slot + 1) * c])
                    .assign(&forest.predict(input.view())?);
            }
            let layer_eval = block_mean(&h, layer.forests.len(), c);
            let enhanced = match &layer.enhancers {
                Some(set) => set.transform(hstack(x, h.view()).view())?,
                None => Array2::zeros((m, 0)),
            };
            let f_new = hstack(h.view(), enhanced.view());
            let (g, reused) = match out.last() {
                Some(prev)
                    if l > 0
                        && config.enable_reuse
                        && config.inference_reuse == InferenceReuse::Surrogate =>
                {
                    let reused = inference_reuse_set(
                        prev.layer_eval.view(),
                        layer_eval.view(),
                        layer.tau,
                        config.reuse_metric,
                    )?;
                    (apply_reuse(f_new.view(), prev.g.view(), &reused)?, reused)
                }
                _ => (f_new, Vec::new()),
            };
            input = hstack(x, g.view());
            out.push(LayerOutput {
                h,
                layer_eval,
                enhanced,
                g,
                reused,
            });
        }
        Ok(out)
    }

    /// Checks the internal consistency of a model, e.g. after loading it.
    pub fn validate(&self) -> std::result::Result<(), String> {
        self.config.validate().map_err(|e| e.to_string())?;
        if self.layers.is_empty() {
            return Err("model has no layers".into());
        }
        if self.best_layer >= self.layers.len() {
            return Err(format!(
                "best layer {} out of range for {} layers",
                self.best_layer,
                self.layers.len()
            ));
        }
        if self.input_dim == 0 || self.n_labels < 2 {
            return Err("invalid input or label dimension".into());
        }
        let d = self.input_dim;
        let c = self.n_labels;
        let n_forests = self.config.n_forests();
        if self.initial_enhancers.is_some() != self.config.enable_enhancement {
            return Err("initial enhancers do not match the enhancement flag".into());
        }
        let mut expected_width = match &self.initial_enhancers {
            Some(set) => {
                if set.input_dim() != d || set.basis().n_labels() != c {
                    return Err("initial enhancers have the wrong shape".into());
                }
                set.validate()?;
                d + set.k()
            }
            None => d,
        };
        for (l, layer) in self.layers.iter().enumerate() {
            if layer.input_width != expected_width {
                return Err(format!("layer {l} has input width {}", layer.input_width));
            }
            if layer.forests.len() != n_forests {
                return Err(format!("layer {l} has {} forests", layer.forests.len()));
            }
            for (forest, kind) in layer.forests.iter().zip(self.config.forest_kinds()) {
                if forest.kind() != kind
                    || forest.n_features() != expected_width
                    || forest.n_labels() != c
                {
                    return Err(format!("layer {l} has a forest of the wrong shape"));
                }
                forest.validate()?;
            }
            let k = match &layer.enhancers {
                Some(set) => {
                    if set.input_dim() != d + n_forests * c || set.basis().n_labels() != c {
                        return Err(format!("layer {l} enhancers have the wrong shape"));
                    }
                    set.validate()?;
                    set.k()
                }
                None => 0,
            };
            if layer.enhancers.is_some() != self.config.enable_enhancement {
                return Err(format!("layer {l} enhancers do not match the flag"));
            }
            if layer.tau.is_some_and(|t| !t.is_finite()) {
                return Err(format!("layer {l} has a non-finite threshold"));
            }
            expected_width = d + n_forests * c + k;
        }
        Ok(())
    }
}

/// Scores the model's predictions on `dataset`, one report per metric.
pub fn evaluate_model(
    model: &CascadeModel,
    dataset: &LdlDataset,
    metrics: &[MetricKind],
) -> Result<Vec<MetricReport>> {
    let predictions = model.predict(dataset.features())?;
    metrics
        .iter()
        .map(|&metric| {
            let score = evaluate_batch(metric, dataset.labels(), predictions.view())?;
            Ok(MetricReport {
                metric,
                mean: score.mean,
                per_sample: score.per_sample,
            })
        })
        .collect()
}
