//! Loading labelled data sets into a [`FiniteSumProblem`].
//!
//! Two formats are read:
//!
//! * CSV: comma separated numbers, optional header row, the label in
//!   `label_column` (0-based) and every other column a feature.
//! * LIBSVM: `label idx:val idx:val ...` with 1-based feature indices; absent
//!   entries are zero.
//!
//! `sensitive_column` is a 0-based index into the feature columns (the label
//! column removed). Rows are split into two groups by that feature: rows whose
//! value equals `sensitive_value` form group 0 when a value is given;
//! otherwise a feature with at most two distinct values puts its smaller value
//! in group 0, and any other feature puts rows at or below its median in
//! group 0. A constant-one intercept column is appended after the features.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FiniteSumProblem, OracleError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("{path}: cannot read data set: {message}")]
    Io { path: PathBuf, message: String },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: label {value} is not valid under the {convention:?} convention")]
    LabelDomain {
        line: u64,
        value: f64,
        convention: LabelConvention,
    },
    #[error("group {0} is empty after splitting on the sensitive column")]
    EmptyGroup(usize),
    #[error("invalid data set option: {0}")]
    Option(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Csv,
    Libsvm,
}

/// How raw labels map to `{-1, +1}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelConvention {
    /// Labels already are `-1` and `+1`.
    PlusMinusOne,
    /// `0 -> -1`, `1 -> +1`.
    ZeroOne,
}

impl LabelConvention {
    fn map(self, y: f64) -> Option<f64> {
        match (self, y) {
            (LabelConvention::PlusMinusOne, y) if y == 1.0 || y == -1.0 => Some(y),
            (LabelConvention::ZeroOne, y) if y == 0.0 => Some(-1.0),
            (LabelConvention::ZeroOne, y) if y == 1.0 => Some(1.0),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetOptions {
    pub format: DatasetFormat,
    pub has_header: bool,
    pub label_column: usize,
    pub label_convention: LabelConvention,
    pub sensitive_column: usize,
    pub sensitive_value: Option<f64>,
    pub keep_sensitive: bool,
    pub regularizers: [f64; 2],
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            format: DatasetFormat::Csv,
            has_header: false,
            label_column: 0,
            label_convention: LabelConvention::PlusMinusOne,
            sensitive_column: 0,
            sensitive_value: None,
            keep_sensitive: true,
            regularizers: [0.1, 0.1],
        }
    }
}

/// Parsed rows before the split.
#[derive(Clone, Debug)]
struct RawData {
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

fn parse_number(s: &str, line: u64) -> Result<f64, DatasetError> {
    let v: f64 = s.trim().parse().map_err(|_| DatasetError::Parse {
        line,
        message: format!("`{}` is not a number", s.trim()),
    })?;
    if !v.is_finite() {
        return Err(DatasetError::Parse {
            line,
            message: format!("`{}` is not finite", s.trim()),
        });
    }
    Ok(v)
}

fn map_label(y: f64, line: u64, convention: LabelConvention) -> Result<f64, DatasetError> {
    convention.map(y).ok_or(DatasetError::LabelDomain {
        line,
        value: y,
        convention,
    })
}

fn read_csv(text: &str, opts: &DatasetOptions) -> Result<RawData, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut data = RawData {
        features: Vec::new(),
        labels: Vec::new(),
    };
    for record in reader.records() {
        let record = record.map_err(|e| DatasetError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if opts.label_column >= record.len() {
            return Err(DatasetError::Parse {
                line,
                message: format!(
                    "label column {} is out of range for {} fields",
                    opts.label_column,
                    record.len()
                ),
            });
        }
        let mut row = Vec::with_capacity(record.len() - 1);
        for (c, field) in record.iter().enumerate() {
            let v = parse_number(field, line)?;
            if c == opts.label_column {
                data.labels.push(map_label(v, line, opts.label_convention)?);
            } else {
                row.push(v);
            }
        }
        data.features.push(row);
    }
    Ok(data)
}

fn read_libsvm(text: &str, opts: &DatasetOptions) -> Result<RawData, DatasetError> {
    let mut entries = Vec::new();
    let mut labels = Vec::new();
    let mut width = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let label = parse_number(tokens.next().unwrap_or(""), line)?;
        labels.push(map_label(label, line, opts.label_convention)?);
        let mut row = Vec::new();
        for tok in tokens {
            let (idx, val) = tok.split_once(':').ok_or_else(|| DatasetError::Parse {
                line,
                message: format!("`{tok}` is not an index:value pair"),
            })?;
            let idx: usize = idx.parse().ok().filter(|i| *i >= 1).ok_or_else(|| DatasetError::Parse {
                line,
                message: format!("`{idx}` is not a 1-based feature index"),
            })?;
            width = width.max(idx);
            row.push((idx - 1, parse_number(val, line)?));
        }
        entries.push(row);
    }
    let features = entries
        .into_iter()
        .map(|row| {
            let mut dense = vec![0.0; width];
            for (c, v) in row {
                dense[c] = v;
            }
            dense
        })
        .collect();
    Ok(RawData { features, labels })
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

/// Group (0 or 1) of each row by the sensitive feature.
pub fn split_groups(column: &[f64], sensitive_value: Option<f64>) -> Vec<usize> {
    let in_first: Box<dyn Fn(f64) -> bool> = match sensitive_value {
        Some(v) => Box::new(move |x| x == v),
        None => {
            let distinct: BTreeSet<u64> = column.iter().map(|v| v.to_bits()).collect();
            if distinct.len() <= 2 {
                let low = column.iter().copied().fold(f64::INFINITY, f64::min);
                Box::new(move |x| x == low)
            } else {
                let med = median(column);
                Box::new(move |x| x <= med)
            }
        }
    };
    column.iter().map(|&x| usize::from(!in_first(x))).collect()
}

fn build(data: RawData, opts: &DatasetOptions) -> Result<FiniteSumProblem, DatasetError> {
    let rows = data.features.len();
    if rows == 0 {
        return Err(DatasetError::Parse {
            line: 0,
            message: "no data rows".into(),
        });
    }
    let width = data.features[0].len();
    if let Some(j) = data.features.iter().position(|r| r.len() != width) {
        return Err(DatasetError::Parse {
            line: j as u64 + 1,
            message: format!("expected {width} features, found {}", data.features[j].len()),
        });
    }
    if opts.sensitive_column >= width {
        return Err(DatasetError::Option(format!(
            "sensitive column {} is out of range for {width} features",
            opts.sensitive_column
        )));
    }
    let column: Vec<f64> = data.features.iter().map(|r| r[opts.sensitive_column]).collect();
    let group_index = split_groups(&column, opts.sensitive_value);
    let kept: Vec<usize> = (0..width)
        .filter(|&c| opts.keep_sensitive || c != opts.sensitive_column)
        .collect();
    let n = kept.len() + 1;
    let features = DMatrix::from_fn(rows, n, |j, c| {
        if c < kept.len() {
            data.features[j][kept[c]]
        } else {
            1.0
        }
    });
    let labels = DVector::from_vec(data.labels);
    FiniteSumProblem::new(
        features,
        labels,
        &group_index,
        opts.regularizers.to_vec(),
        Some(n - 1),
    )
    .map_err(|e| match e {
        OracleError::EmptyGroup(i) => DatasetError::EmptyGroup(i),
        other => DatasetError::Option(other.to_string()),
    })
}

/// Parses `text` in the given format.
pub fn parse_dataset(text: &str, opts: &DatasetOptions) -> Result<FiniteSumProblem, DatasetError> {
    let data = match opts.format {
        DatasetFormat::Csv => read_csv(text, opts)?,
        DatasetFormat::Libsvm => read_libsvm(text, opts)?,
    };
    build(data, opts)
}

pub fn load_dataset(path: &Path, opts: &DatasetOptions) -> Result<FiniteSumProblem, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_dataset(&text, opts)
}
