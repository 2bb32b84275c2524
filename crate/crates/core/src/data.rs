//! Datasets: construction, CSV ingestion and export, standardization and
//! train/test splitting.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::order_free_moments;

/// Where a dataset came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    /// Free-form history: splits, standardization, and so on.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub history: Vec<String>,
}

/// An `n × d` real feature matrix, stored by column, with a real target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    columns: Vec<Vec<f64>>,
    target: Vec<f64>,
    names: Vec<String>,
    target_name: String,
    standardized: bool,
    pub meta: DatasetMeta,
}

impl Dataset {
    /// Builds a dataset from feature columns. Requires `n ≥ 2`, `d ≥ 1`,
    /// finite values everywhere and distinct names.
    pub fn new(
        columns: Vec<Vec<f64>>,
        target: Vec<f64>,
        names: Vec<String>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        let n = target.len();
        if n < 2 {
            return Err(Error::invalid(format!("a dataset needs at least 2 rows, got {n}")));
        }
        if columns.is_empty() {
            return Err(Error::invalid("a dataset needs at least one feature"));
        }
        if names.len() != columns.len() {
            return Err(Error::invalid(format!(
                "{} names for {} feature columns",
                names.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = names.iter().find(|name| !seen.insert(name.as_str())) {
            return Err(Error::invalid(format!("duplicate feature name {dup:?}")));
        }
        for (col, name) in columns.iter().zip(&names) {
            if col.len() != n {
                return Err(Error::invalid(format!(
                    "column {name:?} has {} rows, target has {n}",
                    col.len()
                )));
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    row,
                    column: name.clone(),
                });
            }
        }
        let target_name = target_name.into();
        if let Some(row) = target.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row,
                column: target_name,
            });
        }
        Ok(Dataset {
            columns,
            target,
            names,
            target_name,
            standardized: false,
            meta: DatasetMeta::default(),
        })
    }

    pub fn with_meta(mut self, meta: DatasetMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[i]).collect()
    }

    /// A copy restricted to `rows`, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.n_rows()) {
            return Err(Error::invalid(format!("row {bad} out of range")));
        }
        let mut out = Dataset::new(
            self.columns
                .iter()
                .map(|c| rows.iter().map(|&r| c[r]).collect())
                .collect(),
            rows.iter().map(|&r| self.target[r]).collect(),
            self.names.clone(),
            self.target_name.clone(),
        )?;
        out.standardized = self.standardized;
        out.meta = self.meta.clone();
        Ok(out)
    }

    /// Same rows with the target replaced.
    pub fn with_target(&self, target: Vec<f64>) -> Result<Dataset> {
        let mut out = Dataset::new(
            self.columns.clone(),
            target,
            self.names.clone(),
            self.target_name.clone(),
        )?;
        out.meta = self.meta.clone();
        Ok(out)
    }

    /// Adds uniform noise of width `amplitude × sd` to every feature and to
    /// the target, column by column. The neighbor counts assume continuous
    /// values; on discrete columns many points sit exactly on the k-th
    /// neighbor radius and strict counting drops all of them. Noise far below
    /// the value spacing breaks those ties. Constant columns are left alone.
    pub fn jitter<R: Rng + ?Sized>(&self, amplitude: f64, rng: &mut R) -> Result<Dataset> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::invalid(format!(
                "jitter amplitude must be finite and non-negative, got {amplitude}"
            )));
        }
        let mut perturb = |values: &[f64]| -> Vec<f64> {
            let (_, sd) = order_free_moments(&mut values.to_vec());
            let width = amplitude * sd;
            values
                .iter()
                .map(|v| v + width * (rng.random::<f64>() - 0.5))
                .collect()
        };
        let mut out = self.clone();
        out.columns = self.columns.iter().map(|c| perturb(c)).collect();
        out.target = perturb(&self.target);
        out.meta.history.push(format!("jitter {amplitude:e}"));
        Ok(out)
    }

    /// Rescales each feature and the target to zero mean and unit variance.
    /// Constant columns are centred and recorded in the returned scaling.
    pub fn standardize(&self) -> (Dataset, Scaling) {
        let fit = |values: &[f64]| {
            let mut scratch = values.to_vec();
            order_free_moments(&mut scratch)
        };
        let feature_moments: Vec<(f64, f64)> = self.columns.iter().map(|c| fit(c)).collect();
        let target_moments = fit(&self.target);
        let apply = |values: &[f64], (mean, sd): (f64, f64)| -> Vec<f64> {
            values
                .iter()
                .map(|v| if sd > 0.0 { (v - mean) / sd } else { v - mean })
                .collect()
        };
        let mut out = self.clone();
        out.columns = self
            .columns
            .iter()
            .zip(&feature_moments)
            .map(|(c, &m)| apply(c, m))
            .collect();
        out.target = apply(&self.target, target_moments);
        out.standardized = true;
        out.meta.history.push("standardized".into());
        let constant_columns = feature_moments
            .iter()
            .enumerate()
            .filter(|(_, m)| m.1 == 0.0)
            .map(|(j, _)| j)
            .collect();
        (
            out,
            Scaling {
                features: feature_moments,
                target: target_moments,
                constant_columns,
            },
        )
    }

    /// Serializes in the crate's CSV dialect: one header row, features in
    /// order, target last.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let header: Vec<&str> = self
            .names
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(self.target_name.as_str()))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for i in 0..self.n_rows() {
            for c in &self.columns {
                write!(out, "{},", c[i]).unwrap();
            }
            writeln!(out, "{}", self.target[i]).unwrap();
        }
        out
    }

    /// Writes the CSV file and a `<path>.meta.json` sidecar.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        fs::write(path, self.to_csv_string()).map_err(io_err)?;
        let meta = serde_json::to_string_pretty(&self.meta).expect("meta serializes") + "\n";
        fs::write(meta_path(path), meta).map_err(io_err)
    }
}

/// Sidecar location for a dataset CSV.
pub fn meta_path(path: &Path) -> std::path::PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    name.into()
}

/// Per-column `(mean, sd)` used by [`Dataset::standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub features: Vec<(f64, f64)>,
    pub target: (f64, f64),
    pub constant_columns: Vec<usize>,
}

impl Scaling {
    /// Maps a standardized dataset back to original units.
    pub fn invert(&self, data: &Dataset) -> Result<Dataset> {
        if data.n_features() != self.features.len() {
            return Err(Error::invalid("scaling does not match dataset width"));
        }
        let back = |values: &[f64], (mean, sd): (f64, f64)| -> Vec<f64> {
            values
                .iter()
                .map(|v| if sd > 0.0 { v * sd + mean } else { v + mean })
                .collect()
        };
        let mut out = data.clone();
        out.columns = data
            .columns
            .iter()
            .zip(&self.features)
            .map(|(c, &m)| back(c, m))
            .collect();
        out.target = back(&data.target, self.target);
        out.standardized = false;
        Ok(out)
    }
}

/// Which form of the sine term the synthetic problem uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FriedmanVariant {
    /// `10 sin(X1·X2)`.
    #[default]
    Plain,
    /// `10 sin(π·X1·X2)`, the classic benchmark.
    Pi,
}

pub const FRIEDMAN_FEATURES: usize = 10;
pub const FRIEDMAN_MIN_ROWS: usize = 10;

/// Noise-free response of the synthetic problem; only the first five inputs
/// matter.
pub fn friedman_response(x: &[f64], variant: FriedmanVariant) -> f64 {
    let arg = match variant {
        FriedmanVariant::Plain => x[0] * x[1],
        FriedmanVariant::Pi => std::f64::consts::PI * x[0] * x[1],
    };
    10.0 * arg.sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * x[3] + 5.0 * x[4]
}

/// Draws `n` rows of the ten-input synthetic regression problem.
///
/// Rows are generated in order; each row consumes ten `U[0,1)` draws for the
/// inputs followed by one standard normal draw for the noise.
pub fn friedman_generate<R: Rng + ?Sized>(
    n: usize,
    variant: FriedmanVariant,
    rng: &mut R,
) -> Result<Dataset> {
    if n < FRIEDMAN_MIN_ROWS {
        return Err(Error::invalid(format!(
            "the synthetic generator needs n >= {FRIEDMAN_MIN_ROWS}, got {n}"
        )));
    }
    let mut columns: Vec<Vec<f64>> = (0..FRIEDMAN_FEATURES).map(|_| Vec::with_capacity(n)).collect();
    let mut target = Vec::with_capacity(n);
    let mut row = [0.0; FRIEDMAN_FEATURES];
    for _ in 0..n {
        for (v, col) in row.iter_mut().zip(columns.iter_mut()) {
            *v = rng.random::<f64>();
            col.push(*v);
        }
        let noise: f64 = rng.sample(StandardNormal);
        target.push(friedman_response(&row, variant) + noise);
    }
    let names = (1..=FRIEDMAN_FEATURES).map(|i| format!("X{i}")).collect();
    Dataset::new(columns, target, names, "Y")
}

/// Identifies the target column of a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetColumn {
    Name(String),
    /// Zero-based column index.
    Index(usize),
    Last,
}

impl std::str::FromStr for TargetColumn {
    type Err = std::convert::Infallible;

    /// Integers are read as indices, anything else as a header name.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.parse::<usize>() {
            Ok(i) => TargetColumn::Index(i),
            Err(_) => TargetColumn::Name(s.to_string()),
        })
    }
}

/// Reads a numeric, comma-separated table.
///
/// Without a header, columns are named `X1, X2, …` in file order.
pub fn load_csv(path: impl AsRef<Path>, target: &TargetColumn, header: bool) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut header_names: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    let mut line = 0;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        line = record.position().map(|p| p.line() as usize).unwrap_or(line + 1);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                line,
                expected,
                found: record.len(),
            });
        }
        if header && header_names.is_none() {
            header_names = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        let mut values = Vec::with_capacity(expected);
        for (c, cell) in record.iter().enumerate() {
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                _ => {
                    let column = header_names
                        .as_ref()
                        .map(|h| h[c].clone())
                        .unwrap_or_else(|| format!("#{}", c + 1));
                    return Err(Error::NonNumeric {
                        path: path.to_path_buf(),
                        line,
                        column,
                        value: cell.to_string(),
                    });
                }
            }
        }
        rows.push(values);
    }

    let width = width.ok_or_else(|| Error::Malformed {
        path: path.to_path_buf(),
        message: "file is empty".into(),
    })?;
    let names = header_names.unwrap_or_else(|| (1..=width).map(|i| format!("X{i}")).collect());
    let unknown = || Error::UnknownColumn {
        path: path.to_path_buf(),
        column: match target {
            TargetColumn::Name(s) => s.clone(),
            TargetColumn::Index(i) => i.to_string(),
            TargetColumn::Last => "last".into(),
        },
    };
    let t = match target {
        TargetColumn::Name(name) => names.iter().position(|n| n == name).ok_or_else(unknown)?,
        TargetColumn::Index(i) if *i < width => *i,
        TargetColumn::Index(_) => return Err(unknown()),
        TargetColumn::Last => width - 1,
    };
    if width < 2 {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            message: "need at least one feature column besides the target".into(),
        });
    }

    let mut columns = vec![Vec::with_capacity(rows.len()); width];
    for row in &rows {
        for (col, &v) in columns.iter_mut().zip(row) {
            col.push(v);
        }
    }
    let target_values = columns.remove(t);
    let mut feature_names = names;
    let target_name = feature_names.remove(t);
    let meta = DatasetMeta {
        source: path.display().to_string(),
        ..Default::default()
    };
    Ok(Dataset::new(columns, target_values, feature_names, target_name)?.with_meta(meta))
}

/// How to size a train/test split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitSpec {
    /// Fraction of rows (rounded to nearest) in the training part; the rest
    /// goes to the test part.
    TrainFraction(f64),
    /// Explicit part sizes; their sum must not exceed the row count. Rows
    /// beyond `train + test` are left out.
    Sizes { train: usize, test: usize },
}

/// Randomly partitions the rows into a training and a test dataset.
pub fn split<R: Rng + ?Sized>(
    data: &Dataset,
    spec: SplitSpec,
    rng: &mut R,
) -> Result<(Dataset, Dataset)> {
    let n = data.n_rows();
    let (train, test) = match spec {
        SplitSpec::TrainFraction(f) => {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::invalid(format!("train fraction must be in (0, 1), got {f}")));
            }
            let train = (f * n as f64).round() as usize;
            (train, n.saturating_sub(train))
        }
        SplitSpec::Sizes { train, test } => (train, test),
    };
    if train < 2 || test < 2 {
        return Err(Error::invalid(format!(
            "both parts need at least 2 rows, got train = {train}, test = {test}"
        )));
    }
    if train + test > n {
        return Err(Error::invalid(format!(
            "split sizes {train} + {test} exceed the {n} available rows"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut train_rows = order[..train].to_vec();
    let mut test_rows = order[train..train + test].to_vec();
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    let mut a = data.select_rows(&train_rows)?;
    let mut b = data.select_rows(&test_rows)?;
    a.meta.history.push(format!("split: train {train} of {n}"));
    b.meta.history.push(format!("split: test {test} of {n}"));
    Ok((a, b))
}
