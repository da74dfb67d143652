//! Numeric datasets and ground-truth labels.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::{Error, Result};

/// An `n x d` matrix of finite observations, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Vec<f64>,
    n: usize,
    d: usize,
}

impl DataMatrix {
    /// Wraps row-major `values`. Fails unless `n >= 2`, `d >= 1`, the length
    /// is `n * d` and every entry is finite.
    pub fn new(values: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::EmptyData(n));
        }
        if d == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        if values.len() != n * d {
            return Err(Error::LengthMismatch {
                expected: n * d,
                found: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / d,
                column: pos % d,
            });
        }
        Ok(Self { values, n, d })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    row: i,
                    expected: d,
                    found: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        Self::new(values, rows.len(), d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Squared Euclidean distance between rows `i` and `j`.
    pub fn sq_dist(&self, i: usize, j: usize) -> f64 {
        sq_dist(self.row(i), self.row(j))
    }

    /// Keeps only the rows listed in `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self::new(values, indices.len(), self.d)
    }

    /// Applies `f` to every row, producing a matrix of the same shape.
    pub fn map_rows(&self, mut f: impl FnMut(&[f64], &mut [f64])) -> Result<Self> {
        let mut values = vec![0.0; self.values.len()];
        for (src, dst) in self
            .values
            .chunks_exact(self.d)
            .zip(values.chunks_exact_mut(self.d))
        {
            f(src, dst);
        }
        Self::new(values, self.n, self.d)
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Class ids in `0..num_classes`, numbered in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector {
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabelVector {
    /// Canonicalizes arbitrary hashable labels by order of first appearance.
    pub fn canonicalize<T, I>(raw: I) -> Self
    where
        T: std::hash::Hash + Eq,
        I: IntoIterator<Item = T>,
    {
        let mut ids: HashMap<T, usize> = HashMap::new();
        let labels = raw
            .into_iter()
            .map(|l| {
                let next = ids.len();
                *ids.entry(l).or_insert(next)
            })
            .collect();
        Self {
            labels,
            num_classes: ids.len(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }
}

/// Reads a comma-separated numeric file.
///
/// When `label_column` is set, that column is removed from the features and
/// returned as a canonicalized [`LabelVector`]. Label cells may hold any
/// token; numerically equal tokens (`"2"` and `"2.0"`) denote the same class.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: Option<usize>,
    has_header: bool,
) -> Result<(DataMatrix, Option<LabelVector>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|cause| Error::Io {
        path: path.to_path_buf(),
        cause,
    })?;
    parse_csv(&text, label_column, has_header)
}

pub fn parse_csv(
    text: &str,
    label_column: Option<usize>,
    has_header: bool,
) -> Result<(DataMatrix, Option<LabelVector>)> {
    let mut values = Vec::new();
    let mut raw_labels = Vec::new();
    let mut width = None;
    let mut n = 0;

    let lines = text
        .lines()
        .enumerate()
        .skip(usize::from(has_header))
        .filter(|(_, l)| !l.trim().is_empty());
    for (row, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::DimensionMismatch {
                    row,
                    expected: w,
                    found: fields.len(),
                })
            }
            _ => {}
        }
        if let Some(lc) = label_column {
            if lc >= fields.len() {
                return Err(Error::Parse {
                    row,
                    column: lc,
                    message: format!("label column out of range ({} fields)", fields.len()),
                });
            }
        }
        for (column, field) in fields.iter().enumerate() {
            if Some(column) == label_column {
                raw_labels.push(label_key(field));
                continue;
            }
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                row,
                column,
                message: format!("not a number: {field:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row, column });
            }
            values.push(v);
        }
        n += 1;
    }

    let d = width.unwrap_or(0) - usize::from(label_column.is_some());
    if n < 2 {
        return Err(Error::EmptyData(n));
    }
    let data = DataMatrix::new(values, n, d)?;
    let labels = label_column.map(|_| LabelVector::canonicalize(raw_labels));
    Ok((data, labels))
}

fn label_key(field: &str) -> String {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => format!("{v}"),
        _ => field.to_string(),
    }
}

/// Reads one integer label per line (blank lines ignored).
pub fn load_label_file(path: impl AsRef<Path>) -> Result<LabelVector> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|cause| Error::Io {
        path: path.to_path_buf(),
        cause,
    })?;
    let mut raw = Vec::new();
    for (row, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: i64 = line.parse().map_err(|_| Error::Parse {
            row,
            column: 0,
            message: format!("not an integer label: {line:?}"),
        })?;
        raw.push(v);
    }
    Ok(LabelVector::canonicalize(raw))
}
