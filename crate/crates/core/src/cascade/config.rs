use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricKind;
use crate::trees::{FeatureSubsample, ForestKind, ForestParams, RegressionForestParams};

/// How reuse is applied when predicting, where ground truth is unavailable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceReuse {
    /// Score each row by the metric between the previous and current layer
    /// predictions and reuse rows past the stored threshold.
    Surrogate,
    /// Never reuse at prediction time.
    #[default]
    Off,
}

/// Shared settings of the cascade's distribution forests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSettings {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub feature_subsample: FeatureSubsample,
}

impl Default for ForestSettings {
    fn default() -> Self {
        ForestSettings {
            n_trees: 100,
            max_depth: 10,
            min_leaf: 2,
            feature_subsample: FeatureSubsample::Sqrt,
        }
    }
}

/// Settings of the regression forests that predict pattern scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnhancerSettings {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub feature_subsample: FeatureSubsample,
    pub bootstrap: bool,
}

impl Default for EnhancerSettings {
    fn default() -> Self {
        let p = RegressionForestParams::default();
        EnhancerSettings {
            n_trees: p.n_trees,
            max_depth: p.max_depth,
            min_leaf: p.min_leaf,
            feature_subsample: p.feature_subsample,
            bootstrap: p.bootstrap,
        }
    }
}

impl EnhancerSettings {
    pub fn params(&self, seed: u64) -> RegressionForestParams {
        RegressionForestParams {
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            feature_subsample: self.feature_subsample,
            bootstrap: self.bootstrap,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeConfig {
    pub layers_max: usize,
    /// Extra non-improving layers tolerated; training stops after
    /// `early_stop_tolerance + 1` consecutive layers without improvement.
    pub early_stop_tolerance: usize,
    /// A layer improves only if it beats the best mean by more than this.
    pub min_improvement: f64,
    pub n_random_forests: usize,
    pub n_extra_trees: usize,
    pub forest: ForestSettings,
    pub enhancer: EnhancerSettings,
    pub k_patterns: usize,
    pub reuse_metric: MetricKind,
    pub stop_metric: MetricKind,
    pub oof_folds: usize,
    pub rng_seed: u64,
    pub enable_enhancement: bool,
    pub enable_reuse: bool,
    pub inference_reuse: InferenceReuse,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        CascadeConfig {
            layers_max: 10,
            early_stop_tolerance: 1,
            min_improvement: 0.0,
            n_random_forests: 2,
            n_extra_trees: 2,
            forest: ForestSettings::default(),
            enhancer: EnhancerSettings::default(),
            k_patterns: 5,
            reuse_metric: MetricKind::KLDivergence,
            stop_metric: MetricKind::KLDivergence,
            oof_folds: 5,
            rng_seed: 0,
            enable_enhancement: true,
            enable_reuse: true,
            inference_reuse: InferenceReuse::Off,
        }
    }
}

impl CascadeConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: CascadeConfig =
            toml::from_str(text).map_err(|e| Error::ConfigInvalid(e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::ConfigInvalid(m.to_string()));
        if self.layers_max < 1 {
            return fail("layers_max must be at least 1");
        }
        if self.oof_folds < 2 {
            return fail("oof_folds must be at least 2");
        }
        if self.n_forests() == 0 {
            return fail("a layer needs at least one forest");
        }
        if !(self.min_improvement.is_finite() && self.min_improvement >= 0.0) {
            return fail("min_improvement must be finite and nonnegative");
        }
        if self.enable_enhancement && self.k_patterns == 0 {
            return fail("k_patterns must be at least 1 when enhancement is enabled");
        }
        let f = &self.forest;
        if f.n_trees == 0 || f.max_depth == 0 || f.min_leaf == 0 {
            return fail("forest n_trees, max_depth and min_leaf must be at least 1");
        }
        let e = &self.enhancer;
        if e.n_trees == 0 || e.max_depth == 0 || e.min_leaf == 0 {
            return fail("enhancer n_trees, max_depth and min_leaf must be at least 1");
        }
        Ok(())
    }

    /// Forests per layer.
    pub fn n_forests(&self) -> usize {
        self.n_random_forests + self.n_extra_trees
    }

    /// Forest kinds in slot order: random forests first, then extra trees.
    pub fn forest_kinds(&self) -> Vec<ForestKind> {
        std::iter::repeat_n(ForestKind::RandomForest, self.n_random_forests)
            .chain(std::iter::repeat_n(ForestKind::ExtraTrees, self.n_extra_trees))
            .collect()
    }

    pub fn forest_params(&self, kind: ForestKind, seed: u64) -> ForestParams {
        let mut p = ForestParams::new(kind).with_seed(seed);
        p.n_trees = self.forest.n_trees;
        p.max_depth = self.forest.max_depth;
        p.min_leaf = self.forest.min_leaf;
        p.feature_subsample = self.forest.feature_subsample;
        p
    }

    /// Number of enhanced features per layer (0 when enhancement is off).
    /// Clamped to the label count like the pattern extraction.
    pub fn enhanced_width(&self, n_labels: usize) -> usize {
        if self.enable_enhancement {
            self.k_patterns.min(n_labels)
        } else {
            0
        }
    }
}

/// The four ablation settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    Full,
    WithoutEnhancement,
    WithoutReuse,
    /// Neither mechanism: a plain cascade forest.
    Plain,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::WithoutEnhancement,
        Variant::WithoutReuse,
        Variant::Plain,
    ];

    pub fn apply(self, config: &CascadeConfig) -> CascadeConfig {
        let (enhance, reuse) = match self {
            Variant::Full => (true, true),
            Variant::WithoutEnhancement => (false, true),
            Variant::WithoutReuse => (true, false),
            Variant::Plain => (false, false),
        };
        CascadeConfig {
            enable_enhancement: enhance,
            enable_reuse: reuse,
            ..config.clone()
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::WithoutEnhancement => "wo-fe",
            Variant::WithoutReuse => "wo-fr",
            Variant::Plain => "plain",
        }
    }

    /// Column heading used in ablation tables.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "ERDF",
            Variant::WithoutEnhancement => "w/o fe",
            Variant::WithoutReuse => "w/o fr",
            Variant::Plain => "w/o both",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "full" | "erdf" => Ok(Variant::Full),
            "wo-fe" | "without-enhancement" | "no-fe" => Ok(Variant::WithoutEnhancement),
            "wo-fr" | "without-reuse" | "no-fr" => Ok(Variant::WithoutReuse),
            "plain" | "wo-both" | "df" => Ok(Variant::Plain),
            other => Err(Error::ConfigInvalid(format!("unknown variant `{other}`"))),
        }
    }
}
