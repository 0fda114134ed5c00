//! Tabular datasets: CSV ingestion, seeded partitioning and the synthetic
//! generators used by the experiments.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{Matrix, NumericsError, RandomStream};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("parse error at line {line}: {message}")]
    ParseError { line: u64, message: String },
    #[error("column {0:?} not found in header")]
    MissingColumn(String),
    #[error("non-numeric value {value:?} at line {line}, column {column:?}")]
    NonNumericCell {
        line: u64,
        column: String,
        value: String,
    },
    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Classification,
    Regression,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Class codes `0..class_names.len()`; `class_names[code]` is the original label.
    Classes {
        labels: Vec<usize>,
        class_names: Vec<String>,
    },
    Values(Vec<f64>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Classes { labels, .. } => labels.len(),
            Targets::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> TargetKind {
        match self {
            Targets::Classes { .. } => TargetKind::Classification,
            Targets::Values(_) => TargetKind::Regression,
        }
    }

    fn select(&self, indices: &[usize]) -> Targets {
        match self {
            Targets::Classes {
                labels,
                class_names,
            } => Targets::Classes {
                labels: indices.iter().map(|&i| labels[i]).collect(),
                class_names: class_names.clone(),
            },
            Targets::Values(v) => Targets::Values(indices.iter().map(|&i| v[i]).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub targets: Targets,
    pub feature_names: Vec<String>,
    pub target_name: String,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        targets: Targets,
        feature_names: Vec<String>,
        target_name: impl Into<String>,
    ) -> Result<Self, DatasetError> {
        if features.rows() != targets.len() {
            return Err(DatasetError::InvalidConfig(format!(
                "{} feature rows but {} targets",
                features.rows(),
                targets.len()
            )));
        }
        if feature_names.len() != features.cols() {
            return Err(DatasetError::InvalidConfig(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                features.cols()
            )));
        }
        if let Targets::Classes {
            labels,
            class_names,
        } = &targets
        {
            if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
                return Err(DatasetError::InvalidConfig(format!(
                    "class code {bad} with only {} classes",
                    class_names.len()
                )));
            }
        }
        Ok(Dataset {
            features,
            targets,
            feature_names,
            target_name: target_name.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        match &self.targets {
            Targets::Classes { labels, .. } => Some(labels),
            Targets::Values(_) => None,
        }
    }

    pub fn values(&self) -> Option<&[f64]> {
        match &self.targets {
            Targets::Values(v) => Some(v),
            Targets::Classes { .. } => None,
        }
    }

    pub fn class_names(&self) -> Option<&[String]> {
        match &self.targets {
            Targets::Classes { class_names, .. } => Some(class_names),
            Targets::Values(_) => None,
        }
    }

    pub fn n_classes(&self) -> Option<usize> {
        self.class_names().map(<[String]>::len)
    }

    /// Rows by index, in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            targets: self.targets.select(indices),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
        }
    }
}

pub fn load_csv(
    path: impl AsRef<Path>,
    target_column: &str,
    kind: TargetKind,
) -> Result<Dataset, DatasetError> {
    read_csv(File::open(path)?, target_column, kind)
}

/// Reads a headed, comma-delimited table. Class labels are re-coded to
/// `0..m`, ordered numerically when every label is numeric and
/// lexicographically otherwise.
pub fn read_csv<R: Read>(
    reader: R,
    target_column: &str,
    kind: TargetKind,
) -> Result<Dataset, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(DatasetError::ParseError {
            line: 1,
            message: "empty file".into(),
        });
    }
    let target_idx = headers
        .iter()
        .position(|h| h.trim() == target_column)
        .ok_or_else(|| DatasetError::MissingColumn(target_column.to_string()))?;
    let feature_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_idx)
        .map(|(_, h)| h.trim().to_string())
        .collect();

    let mut data = Vec::new();
    let mut raw_targets = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        for (i, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if i == target_idx {
                raw_targets.push(cell.to_string());
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| DatasetError::NonNumericCell {
                line,
                column: headers[i].to_string(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(DatasetError::NonNumericCell {
                    line,
                    column: headers[i].to_string(),
                    value: cell.to_string(),
                });
            }
            data.push(value);
        }
    }
    if raw_targets.is_empty() {
        return Err(DatasetError::ParseError {
            line: 1,
            message: "no data rows".into(),
        });
    }
    let features = Matrix::new(raw_targets.len(), feature_names.len(), data)?;
    let targets = match kind {
        TargetKind::Classification => encode_labels(&raw_targets),
        TargetKind::Regression => Targets::Values(
            raw_targets
                .iter()
                .enumerate()
                .map(|(row, s)| {
                    s.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| DatasetError::NonNumericCell {
                            line: row as u64 + 2,
                            column: target_column.to_string(),
                            value: s.clone(),
                        })
                })
                .collect::<Result<_, _>>()?,
        ),
    };
    Dataset::new(features, targets, feature_names, target_column)
}

fn csv_error(e: csv::Error) -> DatasetError {
    let line = e.position().map_or(0, |p| p.line());
    DatasetError::ParseError {
        line,
        message: e.to_string(),
    }
}

fn encode_labels(raw: &[String]) -> Targets {
    let distinct: BTreeSet<&str> = raw.iter().map(String::as_str).collect();
    let mut class_names: Vec<String> = distinct.into_iter().map(str::to_string).collect();
    let numeric: Option<Vec<f64>> = class_names.iter().map(|s| s.parse::<f64>().ok()).collect();
    if let Some(values) = numeric {
        let mut paired: Vec<(f64, String)> = values.into_iter().zip(class_names).collect();
        paired.sort_by(|a, b| a.0.total_cmp(&b.0));
        class_names = paired.into_iter().map(|(_, s)| s).collect();
    }
    let labels = raw
        .iter()
        .map(|s| {
            class_names
                .iter()
                .position(|c| c == s)
                .expect("label was collected")
        })
        .collect();
    Targets::Classes {
        labels,
        class_names,
    }
}

/// 17 significant digits: enough to round-trip any `f64`.
pub fn format_exact(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes features then the target column. Class targets are written as their
/// original labels so a reload reproduces the same coding.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<(), DatasetError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = ds.feature_names.clone();
    header.push(ds.target_name.clone());
    wtr.write_record(&header).map_err(csv_error)?;
    for (i, row) in ds.features.iter_rows().enumerate() {
        let mut record: Vec<String> = row.iter().map(|&v| format_exact(v)).collect();
        record.push(match &ds.targets {
            Targets::Classes {
                labels,
                class_names,
            } => class_names[labels[i]].clone(),
            Targets::Values(v) => format_exact(v[i]),
        });
        wtr.write_record(&record).map_err(csv_error)?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionSizes {
    Counts(Vec<usize>),
    Fractions(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub sizes: PartitionSizes,
    pub master_seed: u64,
}

impl SplitSpec {
    pub fn counts(counts: &[usize], master_seed: u64) -> Self {
        SplitSpec {
            sizes: PartitionSizes::Counts(counts.to_vec()),
            master_seed,
        }
    }

    pub fn fractions(fractions: &[f64], master_seed: u64) -> Self {
        SplitSpec {
            sizes: PartitionSizes::Fractions(fractions.to_vec()),
            master_seed,
        }
    }

    /// Resolves to absolute counts summing to `n`. Fractions are rounded and
    /// the last partition absorbs the rounding remainder.
    pub fn resolve(&self, n: usize) -> Result<Vec<usize>, DatasetError> {
        match &self.sizes {
            PartitionSizes::Counts(c) => {
                let total: usize = c.iter().sum();
                if c.is_empty() || total != n {
                    return Err(DatasetError::InfeasibleSplit(format!(
                        "counts {c:?} do not sum to {n}"
                    )));
                }
                Ok(c.clone())
            }
            PartitionSizes::Fractions(f) => {
                let total: f64 = f.iter().sum();
                if f.is_empty()
                    || f.iter().any(|v| !(v.is_finite() && *v >= 0.0))
                    || (total - 1.0).abs() > 1e-9
                {
                    return Err(DatasetError::InfeasibleSplit(format!(
                        "fractions {f:?} must be non-negative and sum to 1"
                    )));
                }
                let mut counts: Vec<usize> =
                    f.iter().map(|v| (v * n as f64).round() as usize).collect();
                let head: usize = counts[..counts.len() - 1].iter().sum();
                if head > n {
                    return Err(DatasetError::InfeasibleSplit(format!(
                        "fractions {f:?} overflow {n} rows"
                    )));
                }
                *counts.last_mut().expect("non-empty") = n - head;
                Ok(counts)
            }
        }
    }
}

/// Partitions rows by a seeded permutation; partitions are disjoint and
/// together cover every row.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<Vec<Dataset>, DatasetError> {
    let counts = spec.resolve(ds.len())?;
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut RandomStream::new(spec.master_seed, 0));
    let mut out = Vec::with_capacity(counts.len());
    let mut start = 0;
    for c in counts {
        out.push(ds.select(&order[start..start + c]));
        start += c;
    }
    Ok(out)
}

/// Uniform random subset of `m` rows without replacement.
pub fn subsample(ds: &Dataset, m: usize, master_seed: u64) -> Result<Dataset, DatasetError> {
    if m > ds.len() {
        return Err(DatasetError::InfeasibleSplit(format!(
            "cannot draw {m} rows from {}",
            ds.len()
        )));
    }
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut RandomStream::new(master_seed, 1));
    Ok(ds.select(&order[..m]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SineConfig {
    pub n_train: usize,
    pub n_test: usize,
    pub train_domain: (f64, f64),
    pub test_domain: (f64, f64),
    /// Gaussian noise is added only to points inside this interval.
    pub noisy_interval: (f64, f64),
    pub noise_sigma: f64,
    pub amplitude: f64,
    pub master_seed: u64,
}

impl Default for SineConfig {
    fn default() -> Self {
        SineConfig {
            n_train: 200,
            n_test: 100,
            train_domain: (-4.0, 4.0),
            test_domain: (-6.0, 6.0),
            noisy_interval: (0.0, 6.0),
            noise_sigma: 0.3,
            amplitude: 1.0,
            master_seed: 0,
        }
    }
}

fn check_interval(name: &str, (lo, hi): (f64, f64)) -> Result<(), DatasetError> {
    if lo.is_finite() && hi.is_finite() && lo < hi {
        Ok(())
    } else {
        Err(DatasetError::InvalidDomain(format!(
            "{name} ({lo}, {hi}) is not an ordered interval"
        )))
    }
}

/// Train and test sets sampled from `amplitude · sin(x)` with noise confined
/// to `noisy_interval`.
pub fn synth_sine(config: &SineConfig) -> Result<(Dataset, Dataset), DatasetError> {
    check_interval("train domain", config.train_domain)?;
    check_interval("test domain", config.test_domain)?;
    check_interval("noisy interval", config.noisy_interval)?;
    if !(config.noise_sigma >= 0.0 && config.noise_sigma.is_finite()) {
        return Err(DatasetError::InvalidDomain(format!(
            "noise sigma {} must be non-negative",
            config.noise_sigma
        )));
    }
    let make = |n: usize, (lo, hi): (f64, f64), stream: u64| -> Result<Dataset, DatasetError> {
        let mut rng = RandomStream::new(config.master_seed, stream);
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            let x = rng.random_range(lo..hi);
            let (a, b) = config.noisy_interval;
            let noise = if a <= x && x <= b {
                config.noise_sigma * rng.standard_normal()
            } else {
                0.0
            };
            xs.push(x);
            ys.push(config.amplitude * x.sin() + noise);
        }
        Dataset::new(
            Matrix::column(&xs)?,
            Targets::Values(ys),
            vec!["x".into()],
            "y",
        )
    };
    Ok((
        make(config.n_train, config.train_domain, 0)?,
        make(config.n_test, config.test_domain, 1)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearConfig {
    pub n: usize,
    /// Intercept followed by one slope per regressor.
    pub beta: Vec<f64>,
    pub noise_sigma: f64,
    /// Noise scale grows linearly with the first regressor: zero at
    /// `mean - 3 sd`, `noise_sigma` at the mean, twice that at `mean + 3 sd`.
    pub heteroscedastic: bool,
    pub feature_mean: f64,
    pub feature_sd: f64,
    pub master_seed: u64,
}

impl Default for LinearConfig {
    fn default() -> Self {
        LinearConfig {
            n: 100,
            beta: vec![1.0, 2.0],
            noise_sigma: 1.0,
            heteroscedastic: false,
            feature_mean: 0.0,
            feature_sd: 1.0,
            master_seed: 0,
        }
    }
}

impl LinearConfig {
    pub fn k(&self) -> usize {
        self.beta.len().saturating_sub(1)
    }

    /// Noise standard deviation at a given first-regressor value.
    pub fn noise_scale(&self, x1: f64) -> f64 {
        if self.heteroscedastic {
            let floor = self.feature_mean - 3.0 * self.feature_sd;
            self.noise_sigma * ((x1 - floor) / (3.0 * self.feature_sd)).max(0.0)
        } else {
            self.noise_sigma
        }
    }

    pub fn mean_response(&self, x: &[f64]) -> f64 {
        self.beta[0]
            + x.iter()
                .zip(&self.beta[1..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }
}

/// Gaussian design with `y = [1|X]β + noise`.
pub fn synth_linear(config: &LinearConfig) -> Result<Dataset, DatasetError> {
    if config.beta.len() < 2 {
        return Err(DatasetError::InvalidConfig(
            "beta needs an intercept and a slope".into(),
        ));
    }
    if config.n == 0 {
        return Err(DatasetError::InvalidConfig("n must be positive".into()));
    }
    if !(config.noise_sigma >= 0.0 && config.noise_sigma.is_finite()) {
        return Err(DatasetError::InvalidConfig(
            "noise sigma must be non-negative".into(),
        ));
    }
    if !(config.feature_sd > 0.0
        && config.feature_sd.is_finite()
        && config.feature_mean.is_finite())
    {
        return Err(DatasetError::InvalidConfig(
            "feature sd must be positive".into(),
        ));
    }
    let k = config.k();
    let mut design_rng = RandomStream::new(config.master_seed, 0);
    let mut noise_rng = RandomStream::new(config.master_seed, 1);
    let mut data = Vec::with_capacity(config.n * k);
    let mut ys = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let row: Vec<f64> = (0..k)
            .map(|_| config.feature_mean + config.feature_sd * design_rng.standard_normal())
            .collect();
        let noise = config.noise_scale(row[0]) * noise_rng.standard_normal();
        ys.push(config.mean_response(&row) + noise);
        data.extend(row);
    }
    let names = (1..=k).map(|j| format!("x{j}")).collect();
    Dataset::new(
        Matrix::new(config.n, k, data)?,
        Targets::Values(ys),
        names,
        "y",
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassesConfig {
    pub n: usize,
    pub n_classes: usize,
    pub n_features: usize,
    /// Standard deviation of the class centres around the origin; points have
    /// unit noise around their centre.
    pub separation: f64,
    pub master_seed: u64,
}

impl Default for ClassesConfig {
    fn default() -> Self {
        ClassesConfig {
            n: 1000,
            n_classes: 3,
            n_features: 4,
            separation: 1.5,
            master_seed: 0,
        }
    }
}

/// Isotropic Gaussian blobs with uniformly drawn class labels.
pub fn synth_classes(config: &ClassesConfig) -> Result<Dataset, DatasetError> {
    if config.n == 0 || config.n_classes < 2 || config.n_features == 0 {
        return Err(DatasetError::InvalidConfig(
            "need n > 0, at least two classes and one feature".into(),
        ));
    }
    if !(config.separation >= 0.0 && config.separation.is_finite()) {
        return Err(DatasetError::InvalidConfig(
            "separation must be non-negative".into(),
        ));
    }
    let mut centre_rng = RandomStream::new(config.master_seed, 0);
    let centres: Vec<Vec<f64>> = (0..config.n_classes)
        .map(|_| {
            (0..config.n_features)
                .map(|_| config.separation * centre_rng.standard_normal())
                .collect()
        })
        .collect();
    let mut rng = RandomStream::new(config.master_seed, 1);
    let mut data = Vec::with_capacity(config.n * config.n_features);
    let mut labels = Vec::with_capacity(config.n);
    for _ in 0..config.n {
        let c = rng.random_range(0..config.n_classes);
        labels.push(c);
        data.extend(centres[c].iter().map(|m| m + rng.standard_normal()));
    }
    let names = (1..=config.n_features).map(|j| format!("x{j}")).collect();
    let class_names = (0..config.n_classes).map(|c| c.to_string()).collect();
    Dataset::new(
        Matrix::new(config.n, config.n_features, data)?,
        Targets::Classes {
            labels,
            class_names,
        },
        names,
        "class",
    )
}

const IRIS_CSV: &str = include_str!("../data/iris.csv");

/// Fisher's Iris data (150 rows, 4 features; setosa = 0, versicolor = 1,
/// virginica = 2).
pub fn iris() -> Dataset {
    read_csv(IRIS_CSV.as_bytes(), "species", TargetKind::Classification)
        .expect("bundled iris table is well formed")
}
