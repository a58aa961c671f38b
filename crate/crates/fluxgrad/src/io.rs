//! JSON, CSV and PGM formats for models, datasets, inputs and results.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fluxgrad_core::evalkit::{BenchmarkReport, Grid};
use fluxgrad_core::gradfield::Dataset;
use fluxgrad_core::{AttributionMap, Model};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Fs {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("{}: {message}", path.display())]
    Invalid { path: PathBuf, message: String },
}

fn fs_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Fs {
        path: path.to_path_buf(),
        source,
    }
}

fn invalid(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Invalid {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn read_model(path: &Path) -> Result<Model, IoError> {
    let text = fs::read_to_string(path).map_err(fs_err(path))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(fs_err(path))
}

pub fn write_model(path: &Path, model: &Model) -> Result<(), IoError> {
    write_json(path, model)
}

/// Numeric rows of a headerless-or-headed CSV. A first row that does not
/// parse as numbers is taken as a header.
fn read_rows(path: &Path) -> Result<Vec<(u64, Vec<f64>)>, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|source| IoError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) => rows.push((line, values)),
            Err(_) if k == 0 => continue,
            Err(e) => {
                return Err(IoError::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(rows)
}

/// Dataset CSV: one sample per row, the last column an integer class label.
pub fn read_dataset(path: &Path) -> Result<Dataset, IoError> {
    let rows = read_rows(path)?;
    if rows.is_empty() {
        return Err(invalid(path, "dataset is empty"));
    }
    let width = rows[0].1.len();
    if width < 2 {
        return Err(invalid(
            path,
            "need at least one feature and a label column",
        ));
    }
    let mut features = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (line, mut row) in rows {
        let parse_err = |message: String| IoError::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if row.len() != width {
            return Err(parse_err(format!(
                "expected {width} columns, found {}",
                row.len()
            )));
        }
        let label = row.pop().unwrap_or_default();
        if !(label >= 0.0 && label.fract() == 0.0 && label < u32::MAX as f64) {
            return Err(parse_err(format!("label {label} is not a class index")));
        }
        labels.push(label as usize);
        features.push(row);
    }
    Dataset::new(features, labels).map_err(|e| invalid(path, e.to_string()))
}

/// Input CSV: one input per row with `dim` features. Rows with one extra
/// column are treated as labeled dataset rows and the label is dropped.
pub fn read_inputs(path: &Path, dim: usize) -> Result<Vec<Vec<f64>>, IoError> {
    let rows = read_rows(path)?;
    let mut inputs = Vec::with_capacity(rows.len());
    for (line, mut row) in rows {
        if row.len() == dim + 1 {
            row.pop();
        }
        if row.len() != dim {
            return Err(IoError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {dim} features, found {}", row.len()),
            });
        }
        inputs.push(row);
    }
    Ok(inputs)
}

/// Comma-separated numbers; a single number is broadcast to `dim`.
pub fn parse_vector(text: &str, dim: usize) -> Result<Vec<f64>, String> {
    let values = text
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    match values.len() {
        1 => Ok(vec![values[0]; dim]),
        n if n == dim => Ok(values),
        n => Err(format!("expected {dim} values, found {n}")),
    }
}

/// `HxW`, e.g. `8x8`.
pub fn parse_grid(text: &str) -> Result<Grid, String> {
    let (h, w) = text
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected HxW, got {text:?}"))?;
    let dim = |s: &str| match s.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("expected HxW with positive sides, got {text:?}")),
    };
    Ok(Grid {
        height: dim(h)?,
        width: dim(w)?,
    })
}

pub fn attribution_csv(map: &AttributionMap) -> String {
    let header: Vec<String> = (0..map.values.len()).map(|i| format!("x{i}")).collect();
    let values: Vec<String> = map.values.iter().map(f64::to_string).collect();
    format!("{}\n{}\n", header.join(","), values.join(","))
}

/// Plain PGM of min-max normalized absolute values; a flat map is all zero.
pub fn attribution_pgm(map: &AttributionMap, grid: Grid) -> Result<String, String> {
    if grid.height * grid.width != map.values.len() {
        return Err(format!(
            "grid {}x{} does not cover {} features",
            grid.height,
            grid.width,
            map.values.len()
        ));
    }
    let abs: Vec<f64> = map.values.iter().map(|v| v.abs()).collect();
    let lo = abs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = abs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = format!("P2\n{} {}\n255\n", grid.width, grid.height);
    for row in abs.chunks(grid.width) {
        let cells: Vec<String> = row
            .iter()
            .map(|v| {
                let level = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
                ((level * 255.0).round() as u8).to_string()
            })
            .collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    let mut file = fs::File::create(path).map_err(fs_err(path))?;
    file.write_all(text.as_bytes()).map_err(fs_err(path))
}

/// One row per method and metric.
pub fn benchmark_table_csv(report: &BenchmarkReport) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["method", "metric", "mean", "stderr", "succeeded", "failed"])?;
    for row in &report.rows {
        for (metric, stat) in [
            ("deletion", row.deletion),
            ("insertion", row.insertion),
            ("insertion_minus_deletion", row.difference),
        ] {
            w.write_record([
                row.label.as_str(),
                metric,
                &stat.mean.to_string(),
                &stat.stderr.to_string(),
                &row.succeeded.to_string(),
                &row.failed.to_string(),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
}

/// Per-sample curves, long format. Empty unless the report kept curves.
pub fn curves_csv(report: &BenchmarkReport) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "method",
        "input",
        "replacement",
        "curve",
        "fraction",
        "score",
    ])?;
    for sample in &report.samples {
        for round in &sample.curves {
            for (name, curve) in [
                ("deletion", &round.deletion),
                ("insertion", &round.insertion),
            ] {
                for (f, s) in curve.fractions.iter().zip(&curve.scores) {
                    w.write_record([
                        sample.label.as_str(),
                        &sample.input.to_string(),
                        round.replacement.id(),
                        name,
                        &f.to_string(),
                        &s.to_string(),
                    ])?;
                }
            }
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
}
