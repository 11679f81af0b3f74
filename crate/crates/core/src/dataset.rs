//! Windowed feature extraction, standardization, fold assignment, and CSV
//! persistence of tabular datasets.
//!
//! A feature vector is the first `n_window` output samples at and after the
//! event inception, one block per selected channel (voltage first, then
//! current). Standardization is the usual standard score `(x - u) / s` with
//! the population (divide-by-n) standard deviation; constant columns keep
//! `s = 1` so transforming them is a no-op shift.

use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::WaveformRecord;

/// Which measurement channels enter the feature window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelMode {
    Voltage,
    Current,
    Both,
}

impl ChannelMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "v" | "voltage" => Ok(ChannelMode::Voltage),
            "i" | "current" => Ok(ChannelMode::Current),
            "vi" | "both" => Ok(ChannelMode::Both),
            other => Err(Error::InvalidParameter(format!(
                "unknown channel mode {other:?} (expected v, i, or vi)"
            ))),
        }
    }

    pub fn n_channels(self) -> usize {
        match self {
            ChannelMode::Voltage | ChannelMode::Current => 1,
            ChannelMode::Both => 2,
        }
    }
}

impl fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ChannelMode::Voltage => "voltage",
            ChannelMode::Current => "current",
            ChannelMode::Both => "both",
        };
        f.write_str(s)
    }
}

/// Row target: fault distance in km, or the non-fault sentinel for load
/// steps (distance is undefined for those).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Label {
    Distance(f64),
    NonFault,
}

impl Label {
    pub fn distance(self) -> Option<f64> {
        match self {
            Label::Distance(d) => Some(d),
            Label::NonFault => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Distance(d) => write!(f, "{d}"),
            Label::NonFault => f.write_str("non-fault"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: Label,
}

/// Rows plus their 7-fold assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<FeatureVector>,
    pub fold_of_row: Vec<usize>,
    pub channel_mode: ChannelMode,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.rows.first().map_or(0, |r| r.values.len())
    }

    pub fn n_folds(&self) -> usize {
        self.fold_of_row.iter().copied().max().map_or(0, |m| m + 1)
    }

    /// Row indices belonging to `fold` and the complementary training rows.
    pub fn split_fold(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut val = Vec::new();
        for (i, &f) in self.fold_of_row.iter().enumerate() {
            if f == fold {
                val.push(i);
            } else {
                train.push(i);
            }
        }
        (train, val)
    }

    pub fn features_of(&self, indices: &[usize]) -> Vec<Vec<f64>> {
        indices.iter().map(|&i| self.rows[i].values.clone()).collect()
    }

    pub fn labels_of(&self, indices: &[usize]) -> Vec<Label> {
        indices.iter().map(|&i| self.rows[i].label).collect()
    }
}

/// Extract one feature vector from a record: the first `n_window` output
/// samples at and after the scenario inception, channels concatenated per
/// `mode`.
pub fn window_features(
    record: &WaveformRecord,
    n_window: usize,
    mode: ChannelMode,
) -> Result<FeatureVector> {
    if n_window == 0 {
        return Err(Error::InvalidParameter("n_window must be >= 1".into()));
    }
    let start = record.sample_index_at_or_after(record.scenario.inception_time);
    if start + n_window > record.voltage.len() {
        return Err(Error::InvalidParameter(format!(
            "record has {} samples after inception, window needs {n_window}",
            record.voltage.len().saturating_sub(start)
        )));
    }
    let mut values = Vec::with_capacity(n_window * mode.n_channels());
    if matches!(mode, ChannelMode::Voltage | ChannelMode::Both) {
        values.extend_from_slice(&record.voltage[start..start + n_window]);
    }
    if matches!(mode, ChannelMode::Current | ChannelMode::Both) {
        values.extend_from_slice(&record.current[start..start + n_window]);
    }
    Ok(FeatureVector {
        values,
        label: record.scenario.label(),
    })
}

/// Window every record and attach a seeded fold assignment.
pub fn build_matrix(
    records: &[WaveformRecord],
    n_window: usize,
    mode: ChannelMode,
    k: usize,
    seed: u64,
) -> Result<FeatureMatrix> {
    let rows: Vec<FeatureVector> = records
        .iter()
        .map(|r| window_features(r, n_window, mode))
        .collect::<Result<_>>()?;
    let fold_of_row = assign_folds(rows.len(), k, seed)?;
    Ok(FeatureMatrix {
        rows,
        fold_of_row,
        channel_mode: mode,
    })
}

/// Per-feature mean and population standard deviation of the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl StandardScaler {
    /// Fit on training rows only. Columns with zero variance get `s = 1`.
    pub fn fit<'a, I>(rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        if rows.len() < 2 {
            return Err(Error::EmptyInput(format!(
                "scaler needs at least 2 rows, got {}",
                rows.len()
            )));
        }
        let width = rows[0].len();
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        // column sums run in sorted order so the fit does not depend on
        // row order; learning-curve shuffles then reproduce k-fold results
        // exactly
        let n = rows.len() as f64;
        let mut column = vec![0.0; rows.len()];
        let mut mean = Vec::with_capacity(width);
        let mut std = Vec::with_capacity(width);
        for j in 0..width {
            for (c, row) in column.iter_mut().zip(&rows) {
                *c = row[j];
            }
            column.sort_unstable_by(f64::total_cmp);
            let m = column.iter().sum::<f64>() / n;
            for c in &mut column {
                let d = *c - m;
                *c = d * d;
            }
            column.sort_unstable_by(f64::total_cmp);
            let sd = (column.iter().sum::<f64>() / n).sqrt();
            mean.push(m);
            std.push(if sd == 0.0 { 1.0 } else { sd });
        }
        Ok(StandardScaler { mean, std })
    }

    pub fn transform_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.mean.len() {
            return Err(Error::DimensionMismatch(format!(
                "scaler fitted on {} columns, row has {}",
                self.mean.len(),
                row.len()
            )));
        }
        Ok(row
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Config(format!("scaler encode: {e}")))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("scaler decode: {e}")))
    }
}

/// Seeded fold assignment: permute row indices, then deal them round-robin
/// so fold sizes differ by at most one.
pub fn assign_folds(n_rows: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::InvalidParameter("fold count must be >= 1".into()));
    }
    if n_rows < k {
        return Err(Error::InvalidParameter(format!(
            "cannot split {n_rows} rows into {k} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut fold_of_row = vec![0; n_rows];
    for (position, &row) in order.iter().enumerate() {
        fold_of_row[row] = position % k;
    }
    Ok(fold_of_row)
}

/// Write the matrix as `f0..fN,label,fold` CSV. Floats use the shortest
/// representation that round-trips, so save/load is lossless.
pub fn save_dataset(matrix: &FeatureMatrix, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    let width = matrix.n_features();
    let header: Vec<String> = (0..width)
        .map(|i| format!("f{i}"))
        .chain(["label".to_string(), "fold".to_string()])
        .collect();
    writeln!(out, "{}", header.join(",")).expect("write to vec");
    for (row, fold) in matrix.rows.iter().zip(&matrix.fold_of_row) {
        for v in &row.values {
            write!(out, "{v},").expect("write to vec");
        }
        writeln!(out, "{},{}", row.label, fold).expect("write to vec");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a dataset written by [`save_dataset`]. Malformed rows are reported
/// with their 1-based line number.
pub fn load_dataset(path: &Path, channel_mode: ChannelMode) -> Result<FeatureMatrix> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.display().to_string(),
        line,
        message,
    };

    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty file".into()))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    let columns: Vec<&str> = header.split(',').collect();
    if columns.len() < 3 || columns[columns.len() - 2] != "label" || columns[columns.len() - 1] != "fold"
    {
        return Err(parse_err(1, format!("bad header {header:?}")));
    }
    let width = columns.len() - 2;

    let mut rows = Vec::new();
    let mut fold_of_row = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width + 2 {
            return Err(parse_err(
                lineno,
                format!("expected {} columns, found {}", width + 2, fields.len()),
            ));
        }
        let mut values = Vec::with_capacity(width);
        for f in &fields[..width] {
            values.push(
                f.parse::<f64>()
                    .map_err(|e| parse_err(lineno, format!("bad feature {f:?}: {e}")))?,
            );
        }
        let label = match fields[width] {
            "non-fault" => Label::NonFault,
            s => Label::Distance(
                s.parse::<f64>()
                    .map_err(|e| parse_err(lineno, format!("bad label {s:?}: {e}")))?,
            ),
        };
        let fold = fields[width + 1]
            .parse::<usize>()
            .map_err(|e| parse_err(lineno, format!("bad fold {:?}: {e}", fields[width + 1])))?;
        rows.push(FeatureVector { values, label });
        fold_of_row.push(fold);
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no data rows".into()));
    }
    Ok(FeatureMatrix {
        rows,
        fold_of_row,
        channel_mode,
    })
}
