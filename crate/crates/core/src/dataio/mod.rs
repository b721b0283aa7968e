//! Dataset files, splits, synthetic data and model files.
//!
//! Dataset files are comma-separated with a header row naming the feature
//! columns `f0..f{d-1}` followed by the label columns `y0..y{c-1}`.

mod model_file;
mod split;
mod synthetic;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::dataset::LdlDataset;
use crate::error::{Error, Result};

pub use model_file::{load_model, model_from_json, model_to_json, save_model, FORMAT_VERSION};
pub use split::{split, split_indices, SplitSpec};
pub use synthetic::{generate_synthetic, SyntheticSpec};

/// Column layout of a parsed header.
struct Header {
    n_features: usize,
    n_labels: usize,
    /// Index of every kept column in the file, features first.
    keep: Vec<usize>,
}

fn indexed(name: &str, prefix: char) -> Option<usize> {
    let rest = name.strip_prefix(prefix)?;
    if rest.is_empty() || (rest.len() > 1 && rest.starts_with('0')) {
        return None;
    }
    rest.parse().ok()
}

/// Parses the header. Features must come first, numbered from 0; labels are
/// required unless `features_only`, in which case any label columns are
/// skipped.
fn parse_header(record: &csv::StringRecord, features_only: bool) -> Result<Header> {
    let mut n_features = 0;
    let mut n_labels = 0;
    let mut keep = Vec::new();
    for (i, raw) in record.iter().enumerate() {
        let name = raw.trim();
        if let Some(j) = indexed(name, 'f') {
            if n_labels > 0 {
                return Err(Error::Schema(format!(
                    "feature column `{name}` after a label column"
                )));
            }
            if j != n_features {
                return Err(Error::Schema(format!(
                    "expected column f{n_features}, found `{name}`"
                )));
            }
            n_features += 1;
            keep.push(i);
        } else if let Some(j) = indexed(name, 'y') {
            if j != n_labels {
                return Err(Error::Schema(format!(
                    "expected column y{n_labels}, found `{name}`"
                )));
            }
            n_labels += 1;
            if !features_only {
                keep.push(i);
            }
        } else {
            return Err(Error::Schema(format!("unrecognised column `{name}`")));
        }
    }
    if n_features == 0 {
        return Err(Error::Schema("no feature columns (f0, f1, ...)".into()));
    }
    if !features_only && n_labels < 2 {
        return Err(Error::Schema(format!(
            "need at least two label columns (y0, y1, ...), found {n_labels}"
        )));
    }
    Ok(Header {
        n_features,
        n_labels: if features_only { 0 } else { n_labels },
        keep,
    })
}

fn read_table(path: &Path, features_only: bool) -> Result<(Header, Vec<f64>, usize)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let header_record = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let header = parse_header(&header_record, features_only)?;
    let width = header_record.len();
    let mut values = Vec::new();
    let mut rows = 0;
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(path, e)),
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(Error::Parse {
                line,
                column: record.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for &col in &header.keep {
            let cell = record[col].trim();
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                column: col + 1,
                message: format!("`{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    column: col + 1,
                    message: format!("`{cell}` is not finite"),
                });
            }
            values.push(v);
        }
        rows += 1;
    }
    Ok((header, values, rows))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Parse {
            line,
            column: 0,
            message: format!("{kind:?}"),
        },
    }
}

/// Reads and validates a dataset file. With `renormalize`, label rows whose
/// sum is off by at most 1e-3 are rescaled instead of rejected.
pub fn load_dataset(path: impl AsRef<Path>, renormalize: bool) -> Result<LdlDataset> {
    let path = path.as_ref();
    let (header, values, rows) = read_table(path, false)?;
    if rows == 0 {
        return Err(Error::Schema("file has no data rows".into()));
    }
    let (d, c) = (header.n_features, header.n_labels);
    let table = Array2::from_shape_vec((rows, d + c), values).expect("row widths checked");
    let features = table.slice(ndarray::s![.., ..d]).to_owned();
    let labels = table.slice(ndarray::s![.., d..]).to_owned();
    LdlDataset::with_renormalize(features, labels, renormalize)
}

/// Reads the feature columns of a file; label columns, if present, are
/// ignored.
pub fn load_features(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let (header, values, rows) = read_table(path, true)?;
    Ok(Array2::from_shape_vec((rows, header.n_features), values).expect("row widths checked"))
}

fn write_table(path: &Path, header: &[String], blocks: &[ArrayView2<'_, f64>]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let mut line = String::new();
    for i in 0..rows {
        line.clear();
        for block in blocks {
            for v in block.row(i) {
                if !line.is_empty() {
                    line.push(',');
                }
                // Display prints the shortest string that parses back exactly
                line.push_str(&v.to_string());
            }
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

fn names(prefix: char, n: usize) -> impl Iterator<Item = String> {
    (0..n).map(move |i| format!("{prefix}{i}"))
}

pub fn save_dataset(dataset: &LdlDataset, path: impl AsRef<Path>) -> Result<()> {
    let header: Vec<String> = names('f', dataset.n_features())
        .chain(names('y', dataset.n_labels()))
        .collect();
    write_table(
        path.as_ref(),
        &header,
        &[dataset.features(), dataset.labels()],
    )
}

/// Writes predicted distributions with a `y0..y{c-1}` header.
pub fn save_predictions(predictions: ArrayView2<'_, f64>, path: impl AsRef<Path>) -> Result<()> {
    let header: Vec<String> = names('y', predictions.ncols()).collect();
    write_table(path.as_ref(), &header, &[predictions])
}
