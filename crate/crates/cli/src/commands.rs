use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use erdf::cascade::diagnostics::{enhancer_abs_error, layer_correlation};
use erdf::cascade::{evaluate_model, fit_cascade, CascadeModel, Variant};
use erdf::dataio::{
    generate_synthetic, load_features, load_model, save_dataset, save_model, save_predictions,
    SyntheticSpec,
};
use erdf::dataset::LdlDataset;
use erdf::metrics::{evaluate_batch, MetricKind};
use erdf::{Error, Result};

use crate::args::{parse_metric, seed_list, ConfigArgs, DataArgs, OutputFormat};
use crate::report::{mean_std, pm, ranks, render};

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Where to write the model file
    #[arg(long)]
    pub model: PathBuf,
    /// Split seed; also the training seed unless --rng-seed is given
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Evaluate this model instead of training one per seed
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Metrics to report (comma-separated; default all six)
    #[arg(long = "metric", alias = "metrics", value_delimiter = ',', value_parser = parse_metric)]
    pub metrics: Vec<MetricKind>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of seeds, counting up from --seed
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Explicit seed list (overrides --seed/--repeats)
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// File with feature columns f0..f{d-1}; label columns are ignored
    #[arg(long)]
    pub data: PathBuf,
    /// Where to write the predicted distributions
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long = "metric", alias = "metrics", value_delimiter = ',', value_parser = parse_metric)]
    pub metrics: Vec<MetricKind>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct DiagnosticsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Use this model instead of training one
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for heatmap.csv, radar.csv and trajectory.csv
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    pub n_samples: usize,
    #[arg(long, default_value_t = 30)]
    pub n_features: usize,
    #[arg(long, default_value_t = 6)]
    pub n_labels: usize,
    #[arg(long, default_value_t = 3)]
    pub k_true: usize,
    #[arg(long, default_value_t = 0.5)]
    pub noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

fn metrics_or_all(metrics: &[MetricKind]) -> Vec<MetricKind> {
    if metrics.is_empty() {
        MetricKind::ALL.to_vec()
    } else {
        metrics.to_vec()
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn train(args: &TrainArgs) -> Result<String> {
    let data = args.data.load()?;
    let (train, _) = args.data.split(&data, args.seed)?;
    let config = args.config.resolve(args.seed)?;
    let (model, _) = fit_cascade(&train, &config)?;
    save_model(&model, &args.model)?;
    Ok(layer_table(&model))
}

fn layer_table(model: &CascadeModel) -> String {
    let header = vec![
        "layer".to_string(),
        format!("mean {}", model.config.stop_metric.label()),
        "reused".to_string(),
        "tau".to_string(),
        "best".to_string(),
    ];
    let rows: Vec<Vec<String>> = model
        .layers
        .iter()
        .enumerate()
        .map(|(l, layer)| {
            vec![
                l.to_string(),
                format!("{:.4}", layer.mean_stop_metric),
                layer.reuse_set_size.to_string(),
                layer.tau.map_or("-".to_string(), |t| format!("{t:.4}")),
                if l == model.best_layer { "*" } else { "" }.to_string(),
            ]
        })
        .collect();
    render(&header, &rows)
}

/// Per-seed test-set means, one vector per metric.
fn run_seeds(
    data: &LdlDataset,
    data_args: &DataArgs,
    config: &ConfigArgs,
    variant: Option<Variant>,
    seeds: &[u64],
    metrics: &[MetricKind],
) -> Result<Vec<Vec<f64>>> {
    let mut per_metric = vec![Vec::with_capacity(seeds.len()); metrics.len()];
    for &seed in seeds {
        let (train, test) = data_args.split(data, seed)?;
        let mut cfg = config.resolve(seed)?;
        if let Some(v) = variant {
            cfg = v.apply(&cfg);
        }
        let (model, _) = fit_cascade(&train, &cfg)?;
        for (m, report) in evaluate_model(&model, &test, metrics)?.into_iter().enumerate() {
            per_metric[m].push(report.mean);
        }
    }
    Ok(per_metric)
}

pub fn eval(args: &EvalArgs) -> Result<String> {
    let metrics = metrics_or_all(&args.metrics);
    let data = args.data.load()?;
    let per_metric = match &args.model {
        Some(path) => {
            let model = load_model(path)?;
            let (_, test) = args.data.split(&data, args.seed)?;
            evaluate_model(&model, &test, &metrics)?
                .into_iter()
                .map(|r| vec![r.mean])
                .collect()
        }
        None => {
            let seeds = seed_list(args.seed, args.repeats, &args.seeds)?;
            run_seeds(&data, &args.data, &args.config, None, &seeds, &metrics)?
        }
    };
    let mut out = String::new();
    match args.format {
        OutputFormat::Text => {
            let header = vec!["metric".to_string(), "ERDF".to_string()];
            let rows: Vec<Vec<String>> = metrics
                .iter()
                .zip(&per_metric)
                .map(|(m, v)| {
                    let (mean, std) = mean_std(v);
                    vec![m.label().to_string(), pm(mean, std)]
                })
                .collect();
            out.push_str(&render(&header, &rows));
        }
        OutputFormat::Csv => {
            out.push_str("metric,mean,std\n");
            for (m, v) in metrics.iter().zip(&per_metric) {
                let (mean, std) = mean_std(v);
                writeln!(out, "{},{mean:.4},{std:.4}", m.name()).unwrap();
            }
        }
    }
    Ok(out)
}

pub fn predict(args: &PredictArgs) -> Result<String> {
    let model = load_model(&args.model)?;
    let x = load_features(&args.data)?;
    let predictions = model.predict(x.view())?;
    save_predictions(predictions.view(), &args.output)?;
    Ok(String::new())
}

pub fn ablate(args: &AblateArgs) -> Result<String> {
    let metrics = metrics_or_all(&args.metrics);
    let data = args.data.load()?;
    let seeds = seed_list(args.seed, args.repeats, &args.seeds)?;
    // [variant][metric] -> (mean, std)
    let mut cells = Vec::new();
    for variant in Variant::ALL {
        let per_metric = run_seeds(&data, &args.data, &args.config, Some(variant), &seeds, &metrics)?;
        cells.push(per_metric.iter().map(|v| mean_std(v)).collect::<Vec<_>>());
    }
    let rank_rows: Vec<Vec<usize>> = metrics
        .iter()
        .enumerate()
        .map(|(m, &metric)| {
            let means: Vec<f64> = cells.iter().map(|v| v[m].0).collect();
            ranks(&means, metric)
        })
        .collect();
    let average_rank: Vec<f64> = (0..Variant::ALL.len())
        .map(|v| rank_rows.iter().map(|r| r[v] as f64).sum::<f64>() / metrics.len() as f64)
        .collect();

    let mut out = String::new();
    match args.format {
        OutputFormat::Text => {
            let header: Vec<String> = std::iter::once("metric".to_string())
                .chain(Variant::ALL.iter().map(|v| v.label().to_string()))
                .collect();
            let mut rows: Vec<Vec<String>> = metrics
                .iter()
                .enumerate()
                .map(|(m, metric)| {
                    std::iter::once(metric.label().to_string())
                        .chain((0..Variant::ALL.len()).map(|v| {
                            let (mean, std) = cells[v][m];
                            format!("{} ({})", pm(mean, std), rank_rows[m][v])
                        }))
                        .collect()
                })
                .collect();
            rows.push(
                std::iter::once("avg. rank".to_string())
                    .chain(average_rank.iter().map(|r| format!("{r:.2}")))
                    .collect(),
            );
            out.push_str(&render(&header, &rows));
        }
        OutputFormat::Csv => {
            out.push_str("metric,variant,mean,std,rank\n");
            for (m, metric) in metrics.iter().enumerate() {
                for (v, variant) in Variant::ALL.iter().enumerate() {
                    let (mean, std) = cells[v][m];
                    writeln!(
                        out,
                        "{},{},{mean:.4},{std:.4},{}",
                        metric.name(),
                        variant.name(),
                        rank_rows[m][v]
                    )
                    .unwrap();
                }
            }
            for (v, variant) in Variant::ALL.iter().enumerate() {
                writeln!(out, "average_rank,{},,,{:.2}", variant.name(), average_rank[v]).unwrap();
            }
        }
    }
    Ok(out)
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut text = header.join(",");
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).map_err(io_error(path))
}

fn mean_kl(truth: &LdlDataset, predictions: &ndarray::Array2<f64>) -> Result<f64> {
    Ok(evaluate_batch(MetricKind::KLDivergence, truth.labels(), predictions.view())?.mean)
}

pub fn diagnostics(args: &DiagnosticsArgs) -> Result<String> {
    let data = args.data.load()?;
    let (train, test) = args.data.split(&data, args.seed)?;
    let (model, train_kl) = match &args.model {
        Some(path) => {
            let model = load_model(path)?;
            let trace = model.predict_trace(train.features())?;
            let kl = trace
                .iter()
                .map(|t| mean_kl(&train, &t.layer_eval))
                .collect::<Result<Vec<_>>>()?;
            (model, kl)
        }
        None => {
            let config = args.config.resolve(args.seed)?;
            let (model, diags) = fit_cascade(&train, &config)?;
            let kl = diags
                .iter()
                .map(|d| mean_kl(&train, &d.layer_eval))
                .collect::<Result<Vec<_>>>()?;
            (model, kl)
        }
    };
    fs::create_dir_all(&args.out).map_err(io_error(&args.out))?;
    let trace = model.predict_trace(test.features())?;

    let layers = model.n_layers();
    let trajectory: Vec<Vec<String>> = (0..layers)
        .map(|l| {
            Ok(vec![
                l.to_string(),
                train_kl[l].to_string(),
                mean_kl(&test, &trace[l].layer_eval)?.to_string(),
            ])
        })
        .collect::<Result<_>>()?;
    write_csv(
        &args.out.join("trajectory.csv"),
        &["layer".into(), "train_kl".into(), "test_kl".into()],
        &trajectory,
    )?;
    let mut summary = format!("wrote trajectory.csv ({layers} layers)\n");

    if model.config.enable_enhancement {
        let enhanced: Vec<_> = trace.iter().map(|t| t.enhanced.view()).collect();
        let heat = layer_correlation(&enhanced)?;
        let header: Vec<String> = std::iter::once("layer".to_string())
            .chain((0..layers).map(|l| format!("l{l}")))
            .collect();
        let rows: Vec<Vec<String>> = heat
            .rows()
            .into_iter()
            .enumerate()
            .map(|(l, row)| {
                std::iter::once(l.to_string())
                    .chain(row.iter().map(|v| v.to_string()))
                    .collect()
            })
            .collect();
        write_csv(&args.out.join("heatmap.csv"), &header, &rows)?;

        let mut picked = vec![0];
        if layers > 1 {
            picked.push(layers - 1);
        }
        let mut radar_rows = Vec::new();
        let mut k = 0;
        for &l in &picked {
            let set = model.layers[l]
                .enhancers
                .as_ref()
                .expect("enhancement is enabled");
            let err = enhancer_abs_error(trace[l].enhanced.view(), test.labels(), set.basis())?;
            k = err.len();
            radar_rows.push(
                std::iter::once(l.to_string())
                    .chain(err.iter().map(|v| v.to_string()))
                    .collect(),
            );
        }
        let header: Vec<String> = std::iter::once("layer".to_string())
            .chain((0..k).map(|j| format!("e{j}")))
            .collect();
        write_csv(&args.out.join("radar.csv"), &header, &radar_rows)?;
        summary.push_str("wrote heatmap.csv and radar.csv\n");
    } else {
        summary.push_str("enhancement is disabled; heatmap.csv and radar.csv not written\n");
    }
    Ok(summary)
}

pub fn synth(args: &SynthArgs) -> Result<String> {
    let data = generate_synthetic(&SyntheticSpec {
        n_samples: args.n_samples,
        n_features: args.n_features,
        n_labels: args.n_labels,
        k_true: args.k_true,
        noise_sigma: args.noise_sigma,
        seed: args.seed,
    })?;
    save_dataset(&data, &args.output)?;
    Ok(String::new())
}
