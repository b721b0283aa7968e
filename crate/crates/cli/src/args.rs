use std::path::PathBuf;

use clap::{Args, ValueEnum};
use erdf::cascade::{CascadeConfig, InferenceReuse, Variant};
use erdf::dataio::{load_dataset, split, SplitSpec};
use erdf::dataset::LdlDataset;
use erdf::metrics::MetricKind;
use erdf::trees::FeatureSubsample;
use erdf::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subsample {
    Sqrt,
    All,
}

impl From<Subsample> for FeatureSubsample {
    fn from(s: Subsample) -> Self {
        match s {
            Subsample::Sqrt => FeatureSubsample::Sqrt,
            Subsample::All => FeatureSubsample::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InferenceReuseArg {
    Surrogate,
    Off,
}

impl From<InferenceReuseArg> for InferenceReuse {
    fn from(s: InferenceReuseArg) -> Self {
        match s {
            InferenceReuseArg::Surrogate => InferenceReuse::Surrogate,
            InferenceReuseArg::Off => InferenceReuse::Off,
        }
    }
}

/// Dataset file and train/test split.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Dataset file (header f0..f{d-1}, y0..y{c-1})
    #[arg(long)]
    pub data: PathBuf,
    /// Rescale label rows whose sum is off by at most 1e-3
    #[arg(long)]
    pub renormalize: bool,
    /// Use the whole file instead of a train/test split
    #[arg(long)]
    pub no_split: bool,
    /// Fraction of rows used for training
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
}

impl DataArgs {
    pub fn load(&self) -> Result<LdlDataset> {
        load_dataset(&self.data, self.renormalize)
    }

    /// Train and test parts for `seed`; with `--no-split` both are the whole
    /// file.
    pub fn split(&self, data: &LdlDataset, seed: u64) -> Result<(LdlDataset, LdlDataset)> {
        if self.no_split {
            return Ok((data.clone(), data.clone()));
        }
        split(
            data,
            &SplitSpec {
                train_fraction: self.train_fraction,
                seed,
            },
        )
    }
}

/// Cascade configuration: a TOML file plus per-field overrides.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML file with cascade settings
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Ablation variant applied on top of the configuration
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    /// Maximum number of cascade layers
    #[arg(long)]
    pub layers_max: Option<usize>,
    /// Extra non-improving layers tolerated before stopping
    #[arg(long)]
    pub early_stop_tolerance: Option<usize>,
    /// Margin a layer must beat the best score by
    #[arg(long)]
    pub min_improvement: Option<f64>,
    /// Random forests per layer
    #[arg(long)]
    pub n_random_forests: Option<usize>,
    /// Extra-trees forests per layer
    #[arg(long)]
    pub n_extra_trees: Option<usize>,
    /// Trees per cascade forest
    #[arg(long)]
    pub n_trees: Option<usize>,
    /// Depth limit of cascade trees
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Minimum rows per leaf of cascade trees
    #[arg(long)]
    pub min_leaf: Option<usize>,
    /// Features considered per split in cascade trees
    #[arg(long, value_enum)]
    pub feature_subsample: Option<Subsample>,
    /// Trees per enhancer forest
    #[arg(long)]
    pub enhancer_trees: Option<usize>,
    /// Depth limit of enhancer trees
    #[arg(long)]
    pub enhancer_max_depth: Option<usize>,
    /// Minimum rows per leaf of enhancer trees
    #[arg(long)]
    pub enhancer_min_leaf: Option<usize>,
    /// Features considered per split in enhancer trees
    #[arg(long, value_enum)]
    pub enhancer_feature_subsample: Option<Subsample>,
    /// Bootstrap rows for enhancer trees
    #[arg(long)]
    pub enhancer_bootstrap: Option<bool>,
    /// Number of label relationship patterns
    #[arg(long)]
    pub k_patterns: Option<usize>,
    /// Metric that decides which rows reuse old features
    #[arg(long, value_parser = parse_metric)]
    pub reuse_metric: Option<MetricKind>,
    /// Metric for early stopping and best-layer choice
    #[arg(long, value_parser = parse_metric)]
    pub stop_metric: Option<MetricKind>,
    /// Folds for out-of-fold layer outputs
    #[arg(long)]
    pub oof_folds: Option<usize>,
    /// Training seed; defaults to --seed
    #[arg(long)]
    pub rng_seed: Option<u64>,
    /// Turn feature enhancement on or off
    #[arg(long)]
    pub enable_enhancement: Option<bool>,
    /// Turn feature reuse on or off
    #[arg(long)]
    pub enable_reuse: Option<bool>,
    /// Feature reuse at prediction time
    #[arg(long, value_enum)]
    pub inference_reuse: Option<InferenceReuseArg>,
}

pub fn parse_metric(s: &str) -> std::result::Result<MetricKind, String> {
    s.parse::<MetricKind>().map_err(|e| e.to_string())
}

pub fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse::<Variant>().map_err(|e| e.to_string())
}

impl ConfigArgs {
    /// Builds the configuration for one run: file, then variant, then
    /// explicit field flags. `seed` is the training seed unless
    /// `--rng-seed` is given.
    pub fn resolve(&self, seed: u64) -> Result<CascadeConfig> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                    path: path.clone(),
                    source,
                })?;
                CascadeConfig::from_toml(&text)?
            }
            None => CascadeConfig::default(),
        };
        if let Some(v) = self.variant {
            c = v.apply(&c);
        }
        c.rng_seed = self.rng_seed.unwrap_or(seed);
        macro_rules! set {
            ($($field:ident).+ = $value:expr) => {
                if let Some(v) = $value {
                    c.$($field).+ = v.into();
                }
            };
        }
        set!(layers_max = self.layers_max);
        set!(early_stop_tolerance = self.early_stop_tolerance);
        set!(min_improvement = self.min_improvement);
        set!(n_random_forests = self.n_random_forests);
        set!(n_extra_trees = self.n_extra_trees);
        set!(forest.n_trees = self.n_trees);
        set!(forest.max_depth = self.max_depth);
        set!(forest.min_leaf = self.min_leaf);
        set!(forest.feature_subsample = self.feature_subsample);
        set!(enhancer.n_trees = self.enhancer_trees);
        set!(enhancer.max_depth = self.enhancer_max_depth);
        set!(enhancer.min_leaf = self.enhancer_min_leaf);
        set!(enhancer.feature_subsample = self.enhancer_feature_subsample);
        set!(enhancer.bootstrap = self.enhancer_bootstrap);
        set!(k_patterns = self.k_patterns);
        set!(reuse_metric = self.reuse_metric);
        set!(stop_metric = self.stop_metric);
        set!(oof_folds = self.oof_folds);
        set!(enable_enhancement = self.enable_enhancement);
        set!(enable_reuse = self.enable_reuse);
        set!(inference_reuse = self.inference_reuse);
        c.validate()?;
        Ok(c)
    }
}

/// Seeds `seed, seed + 1, ...` for `repeats` runs, or an explicit list.
pub fn seed_list(seed: u64, repeats: usize, seeds: &[u64]) -> Result<Vec<u64>> {
    if !seeds.is_empty() {
        return Ok(seeds.to_vec());
    }
    if repeats == 0 {
        return Err(Error::ConfigInvalid("--repeats must be at least 1".into()));
    }
    Ok((0..repeats as u64).map(|i| seed.wrapping_add(i)).collect())
}
