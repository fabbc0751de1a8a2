//! Tabular datasets: CSV ingestion, mean binarization of attributes,
//! privileged-side assignment and seeded train/test splitting.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Immutable feature matrix with binary labels (1 = favorable).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
    labels: Vec<u8>,
    column_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from a row-major feature buffer.
    pub fn new(
        features: Vec<f64>,
        labels: Vec<u8>,
        column_names: Vec<String>,
    ) -> Result<Self> {
        let n_rows = labels.len();
        let n_cols = column_names.len();
        if features.len() != n_rows * n_cols {
            return Err(Error::LengthMismatch {
                what: "feature buffer",
                expected: n_rows * n_cols,
                found: features.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidDataset(format!("label {bad} is not 0 or 1")));
        }
        let mut seen = HashSet::with_capacity(n_cols);
        for name in &column_names {
            if name.is_empty() {
                return Err(Error::InvalidDataset("empty column name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateColumn(name.clone()));
            }
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite value at row {}, column `{}`",
                pos / n_cols.max(1),
                column_names[pos % n_cols.max(1)]
            )));
        }
        Ok(Self {
            features,
            n_rows,
            n_cols,
            labels,
            column_names,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<u8>, column_names: Vec<String>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::LengthMismatch {
                what: "labels",
                expected: rows.len(),
                found: labels.len(),
            });
        }
        let mut features = Vec::with_capacity(rows.len() * column_names.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != column_names.len() {
                return Err(Error::RowArity {
                    row: i,
                    expected: column_names.len(),
                    found: row.len(),
                });
            }
            features.extend_from_slice(row);
        }
        Self::new(features, labels, column_names)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Row-major feature buffer.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.features[row * self.n_cols + col]
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.column_names
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_rows).map(move |i| self.value(i, col))
    }

    /// New dataset containing the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(rows.len() * self.n_cols);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            features.extend_from_slice(self.row(r));
            labels.push(self.labels[r]);
        }
        Dataset {
            features,
            n_rows: rows.len(),
            n_cols: self.n_cols,
            labels,
            column_names: self.column_names.clone(),
        }
    }
}

/// How to read a CSV file into a [`Dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadOptions {
    pub path: std::path::PathBuf,
    pub label_column: String,
    pub positive_label: String,
    /// The other label value. Inferred from the first non-positive value
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_label: Option<String>,
    /// Raw columns to keep as features, in file order. All columns when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
    /// Ascending cut points turning numeric columns into categorical bins
    /// before one-hot encoding.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub bins: BTreeMap<String, Vec<f64>>,
}

impl LoadOptions {
    pub fn new(
        path: impl Into<std::path::PathBuf>,
        label_column: impl Into<String>,
        positive_label: impl Into<String>,
    ) -> Self {
        Self {
            path: path.into(),
            label_column: label_column.into(),
            positive_label: positive_label.into(),
            negative_label: None,
            columns: None,
            bins: BTreeMap::new(),
        }
    }
}

/// Loads a headered CSV. Text columns are one-hot encoded as `column=value`
/// in first-appearance order; the label column is removed from the features.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str, positive_label: &str) -> Result<Dataset> {
    load_csv_with(&LoadOptions::new(path.as_ref(), label_column, positive_label))
}

pub fn load_csv_with(opts: &LoadOptions) -> Result<Dataset> {
    let file = File::open(&opts.path).map_err(|e| Error::io(&opts.path, e))?;
    read_csv(file, opts)
}

enum ColumnKind {
    Numeric,
    Binned(Vec<f64>),
    Categorical,
}

pub(crate) fn read_csv<R: std::io::Read>(reader: R, opts: &LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let label_idx = header
        .iter()
        .position(|h| *h == opts.label_column)
        .ok_or_else(|| Error::UnknownColumn(opts.label_column.clone()))?;

    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(Error::RowArity {
                row: i + 1,
                expected: header.len(),
                found: rec.len(),
            });
        }
        records.push(rec);
    }

    let keep: Vec<usize> = match &opts.columns {
        Some(cols) => cols
            .iter()
            .map(|c| {
                header
                    .iter()
                    .position(|h| h == c)
                    .filter(|&i| i != label_idx)
                    .ok_or_else(|| Error::UnknownColumn(c.clone()))
            })
            .collect::<Result<Vec<_>>>()?,
        None => (0..header.len()).filter(|&i| i != label_idx).collect(),
    };
    for name in opts.bins.keys() {
        if !keep.iter().any(|&i| header[i] == *name) {
            return Err(Error::UnknownColumn(name.clone()));
        }
    }

    let mut labels = Vec::with_capacity(records.len());
    let mut negative = opts.negative_label.clone();
    for (i, rec) in records.iter().enumerate() {
        let v = &rec[label_idx];
        if v == opts.positive_label {
            labels.push(1);
            continue;
        }
        match &negative {
            Some(n) if n == v => labels.push(0),
            Some(_) => {
                return Err(Error::LabelOutsidePair {
                    row: i + 1,
                    value: v.to_string(),
                })
            }
            None => {
                negative = Some(v.to_string());
                labels.push(0);
            }
        }
    }

    // Column kind is decided by the first data row.
    let kinds: Vec<ColumnKind> = keep
        .iter()
        .map(|&c| {
            if let Some(cuts) = opts.bins.get(&header[c]) {
                return ColumnKind::Binned(cuts.clone());
            }
            match records.first().map(|r| parse_finite(&r[c])) {
                Some(Some(_)) | None => ColumnKind::Numeric,
                Some(None) => ColumnKind::Categorical,
            }
        })
        .collect();

    let n_rows = records.len();
    // Each kept column expands into one or more output columns.
    let mut out_columns: Vec<(String, Vec<f64>)> = Vec::new();
    for (&c, kind) in keep.iter().zip(&kinds) {
        let name = &header[c];
        match kind {
            ColumnKind::Numeric => {
                let mut values = Vec::with_capacity(n_rows);
                for (i, rec) in records.iter().enumerate() {
                    let v = parse_finite(&rec[c]).ok_or_else(|| Error::UnparseableNumber {
                        row: i + 1,
                        column: name.clone(),
                        value: rec[c].to_string(),
                    })?;
                    values.push(v);
                }
                out_columns.push((name.clone(), values));
            }
            ColumnKind::Binned(cuts) => {
                let mut cells = Vec::with_capacity(n_rows);
                for (i, rec) in records.iter().enumerate() {
                    let v = parse_finite(&rec[c]).ok_or_else(|| Error::UnparseableNumber {
                        row: i + 1,
                        column: name.clone(),
                        value: rec[c].to_string(),
                    })?;
                    cells.push(bin_label(v, cuts));
                }
                out_columns.extend(one_hot(name, cells.iter().map(String::as_str)));
            }
            ColumnKind::Categorical => {
                out_columns.extend(one_hot(name, records.iter().map(|r| &r[c])));
            }
        }
    }

    let n_cols = out_columns.len();
    let mut features = vec![0.0; n_rows * n_cols];
    for (j, (_, values)) in out_columns.iter().enumerate() {
        for (i, v) in values.iter().enumerate() {
            features[i * n_cols + j] = *v;
        }
    }
    let names = out_columns.into_iter().map(|(n, _)| n).collect();
    Dataset::new(features, labels, names)
}

fn parse_finite(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn bin_label(v: f64, cuts: &[f64]) -> String {
    let k = cuts.iter().take_while(|&&c| c <= v).count();
    if k == 0 {
        format!("<{}", cuts[0])
    } else if k == cuts.len() {
        format!(">={}", cuts[k - 1])
    } else {
        format!("[{},{})", cuts[k - 1], cuts[k])
    }
}

fn one_hot<'a>(name: &str, cells: impl Iterator<Item = &'a str>) -> Vec<(String, Vec<f64>)> {
    let cells: Vec<&str> = cells.collect();
    let mut order: Vec<&str> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for &cell in &cells {
        if !index.contains_key(cell) {
            index.insert(cell, order.len());
            order.push(cell);
        }
    }
    let mut columns: Vec<(String, Vec<f64>)> = order
        .iter()
        .map(|v| (format!("{name}={v}"), vec![0.0; cells.len()]))
        .collect();
    for (i, cell) in cells.iter().enumerate() {
        columns[index[cell]].1[i] = 1.0;
    }
    columns
}

/// Binary group membership for one attribute.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupAssignment {
    attribute_name: String,
    membership: Vec<u8>,
    privileged_value: Option<u8>,
}

impl GroupAssignment {
    pub fn new(attribute_name: impl Into<String>, membership: Vec<u8>) -> Result<Self> {
        let attribute_name = attribute_name.into();
        if membership.iter().any(|&m| m > 1) {
            return Err(Error::InvalidDataset(format!(
                "membership of `{attribute_name}` must be 0 or 1"
            )));
        }
        Ok(Self {
            attribute_name,
            membership,
            privileged_value: None,
        })
    }

    pub fn with_privileged(mut self, value: u8) -> Result<Self> {
        if value > 1 {
            return Err(Error::InvalidDataset(format!(
                "privileged value {value} is not 0 or 1"
            )));
        }
        self.privileged_value = Some(value);
        Ok(self)
    }

    pub fn attribute_name(&self) -> &str {
        &self.attribute_name
    }

    pub fn membership(&self) -> &[u8] {
        &self.membership
    }

    pub fn privileged_value(&self) -> Option<u8> {
        self.privileged_value
    }

    pub fn len(&self) -> usize {
        self.membership.len()
    }

    pub fn is_empty(&self) -> bool {
        self.membership.is_empty()
    }

    /// (size of group 0, size of group 1)
    pub fn group_sizes(&self) -> (usize, usize) {
        let ones = self.membership.iter().filter(|&&m| m == 1).count();
        (self.membership.len() - ones, ones)
    }

    /// Per-row indicator of the unprivileged side. Falls back to the raw
    /// membership when no privileged side is set.
    pub fn unprivileged_indicator(&self) -> Vec<u8> {
        match self.privileged_value {
            Some(1) => self.membership.iter().map(|&m| 1 - m).collect(),
            _ => self.membership.clone(),
        }
    }

    /// Same grouping with the privileged side flipped.
    pub fn swapped(&self) -> Self {
        Self {
            attribute_name: self.attribute_name.clone(),
            membership: self.membership.clone(),
            privileged_value: self.privileged_value.map(|p| 1 - p),
        }
    }
}

pub fn column_mean(dataset: &Dataset, column: &str) -> Result<f64> {
    let col = dataset.column_index(column)?;
    if dataset.n_rows() == 0 {
        return Err(Error::DegenerateAttribute(column.to_string()));
    }
    Ok(dataset.column(col).sum::<f64>() / dataset.n_rows() as f64)
}

/// Membership 1 where the value strictly exceeds the column mean.
pub fn binarize_by_mean(dataset: &Dataset, column: &str) -> Result<GroupAssignment> {
    let mean = column_mean(dataset, column)?;
    binarize_at(dataset, column, mean)
}

/// Membership 1 where the value strictly exceeds `threshold`.
pub fn binarize_at(dataset: &Dataset, column: &str, threshold: f64) -> Result<GroupAssignment> {
    let col = dataset.column_index(column)?;
    let membership: Vec<u8> = dataset.column(col).map(|v| u8::from(v > threshold)).collect();
    let group = GroupAssignment::new(column, membership)?;
    match group.group_sizes() {
        (0, _) | (_, 0) => Err(Error::DegenerateAttribute(column.to_string())),
        _ => Ok(group),
    }
}

/// Marks the side with the higher favorable base rate as privileged, ties to 1.
pub fn set_privileged(group: GroupAssignment, dataset: &Dataset) -> Result<GroupAssignment> {
    set_privileged_from_labels(group, dataset.labels())
}

pub fn set_privileged_from_labels(group: GroupAssignment, labels: &[u8]) -> Result<GroupAssignment> {
    if labels.len() != group.len() {
        return Err(Error::LengthMismatch {
            what: "labels",
            expected: group.len(),
            found: labels.len(),
        });
    }
    let mut count = [0usize; 2];
    let mut favorable = [0usize; 2];
    for (&m, &y) in group.membership().iter().zip(labels) {
        count[m as usize] += 1;
        favorable[m as usize] += y as usize;
    }
    if count[0] == 0 || count[1] == 0 {
        return Err(Error::EmptyGroup(group.attribute_name().to_string()));
    }
    // rate1 >= rate0, cross-multiplied to stay exact
    let privileged = u8::from(favorable[1] * count[0] >= favorable[0] * count[1]);
    group.with_privileged(privileged)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            seed: 42,
        }
    }
}

/// Seeded partition of `0..n_rows` into (train, test) index sets, each sorted.
/// The test side holds `max(1, floor(n · fraction))` rows.
pub fn split_indices(n_rows: usize, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(Error::InvalidSplit(format!(
            "test fraction {} outside (0, 1)",
            spec.test_fraction
        )));
    }
    if n_rows < 2 {
        return Err(Error::InvalidSplit(format!("{n_rows} rows cannot be split")));
    }
    let n_test = ((n_rows as f64 * spec.test_fraction).floor() as usize).max(1);
    if n_test >= n_rows {
        return Err(Error::InvalidSplit(format!(
            "fraction {} leaves no training rows",
            spec.test_fraction
        )));
    }
    let mut perm: Vec<usize> = (0..n_rows).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let mut test = perm[..n_test].to_vec();
    let mut train = perm[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let (train, test) = split_indices(dataset.n_rows(), spec)?;
    Ok((dataset.select_rows(&train), dataset.select_rows(&test)))
}
