//! Tabular review data: CSV ingest, column screening, descriptive statistics,
//! hold-out splitting and a synthetic stand-in for the review corpus.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::SentimentLabel;
use crate::matrix::{FeatureMatrix, MatrixError};
use crate::seed::rng_for;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("column {column:?} has {found} values, expected {expected}")]
    ColumnLength {
        column: String,
        found: usize,
        expected: usize,
    },
    #[error("duplicate column name {0:?}")]
    DuplicateColumn(String),
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("column {column:?} is {found}, expected {expected}")]
    WrongKind {
        column: String,
        found: ColumnKind,
        expected: &'static str,
    },
    #[error("column {0:?} has no non-missing values")]
    AllMissing(String),
    #[error("bin count must be at least 1")]
    ZeroBins,
    #[error("correlation needs at least 2 columns, got {0}")]
    TooFewColumns(usize),
    #[error("columns {0:?} and {1:?} share fewer than 2 complete rows")]
    TooFewRows(String, String),
    #[error("holdout size {n} out of range for {rows} rows")]
    HoldoutSize { n: usize, rows: usize },
    #[error("row {row}: rating {value} is not one of 1..5")]
    BadRating { row: usize, value: f64 },
    #[error("row {row}: missing value in column {column:?}")]
    MissingValue { row: usize, column: String },
    #[error("synthetic data needs at least 10 rows, got {0}")]
    TooFewSyntheticRows(usize),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

pub type Result<T> = std::result::Result<T, DataError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Text,
}

impl std::fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Categorical => "categorical",
            ColumnKind::Text => "text",
        })
    }
}

/// Cell values with per-cell missingness (`None`).
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    Categorical(Vec<Option<String>>),
    Text(Vec<Option<String>>),
}

impl ColumnData {
    pub fn kind(&self) -> ColumnKind {
        match self {
            ColumnData::Numeric(_) => ColumnKind::Numeric,
            ColumnData::Categorical(_) => ColumnKind::Categorical,
            ColumnData::Text(_) => ColumnKind::Text,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) | ColumnData::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn missing_count(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.iter().filter(|c| c.is_none()).count(),
            ColumnData::Categorical(v) | ColumnData::Text(v) => {
                v.iter().filter(|c| c.is_none()).count()
            }
        }
    }

    fn take(&self, indices: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(indices.iter().map(|&i| v[i]).collect()),
            ColumnData::Categorical(v) => {
                ColumnData::Categorical(indices.iter().map(|&i| v[i].clone()).collect())
            }
            ColumnData::Text(v) => {
                ColumnData::Text(indices.iter().map(|&i| v[i].clone()).collect())
            }
        }
    }

    fn cell_to_string(&self, row: usize) -> String {
        match self {
            ColumnData::Numeric(v) => v[row].map(|x| x.to_string()).unwrap_or_default(),
            ColumnData::Categorical(v) | ColumnData::Text(v) => v[row].clone().unwrap_or_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub data: ColumnData,
}

impl Column {
    pub fn numeric(name: impl Into<String>, values: Vec<Option<f64>>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Numeric(values),
        }
    }

    pub fn categorical(name: impl Into<String>, values: Vec<Option<String>>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Categorical(values),
        }
    }

    pub fn text(name: impl Into<String>, values: Vec<Option<String>>) -> Self {
        Column {
            name: name.into(),
            data: ColumnData::Text(values),
        }
    }

    pub fn kind(&self) -> ColumnKind {
        self.data.kind()
    }

    pub fn missing_fraction(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.missing_count() as f64 / self.data.len() as f64
    }
}

/// Named, typed columns of equal length with an optional target column.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    columns: Vec<Column>,
    row_count: usize,
    target: Option<String>,
}

impl TabularDataset {
    pub fn new(columns: Vec<Column>, target: Option<String>) -> Result<Self> {
        let row_count = columns.first().map_or(0, |c| c.data.len());
        for (i, c) in columns.iter().enumerate() {
            if c.data.len() != row_count {
                return Err(DataError::ColumnLength {
                    column: c.name.clone(),
                    found: c.data.len(),
                    expected: row_count,
                });
            }
            if columns[..i].iter().any(|o| o.name == c.name) {
                return Err(DataError::DuplicateColumn(c.name.clone()));
            }
        }
        if let Some(t) = &target {
            if !columns.iter().any(|c| &c.name == t) {
                return Err(DataError::UnknownColumn(t.clone()));
            }
        }
        Ok(TabularDataset {
            columns,
            row_count,
            target,
        })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn row_count(&self) -> usize {
        self.row_count
    }

    pub fn target(&self) -> Option<&str> {
        self.target.as_deref()
    }

    pub fn with_target(self, target: Option<String>) -> Result<Self> {
        Self::new(self.columns, target)
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| DataError::UnknownColumn(name.to_string()))
    }

    pub fn numeric_column(&self, name: &str) -> Result<&[Option<f64>]> {
        match &self.column(name)?.data {
            ColumnData::Numeric(v) => Ok(v),
            other => Err(DataError::WrongKind {
                column: name.to_string(),
                found: other.kind(),
                expected: "numeric",
            }),
        }
    }

    /// Values of a categorical or text column.
    pub fn string_column(&self, name: &str) -> Result<&[Option<String>]> {
        match &self.column(name)?.data {
            ColumnData::Categorical(v) | ColumnData::Text(v) => Ok(v),
            other => Err(DataError::WrongKind {
                column: name.to_string(),
                found: other.kind(),
                expected: "categorical or text",
            }),
        }
    }

    /// Numeric column with no missing cells.
    pub fn dense_numeric(&self, name: &str) -> Result<Vec<f64>> {
        self.numeric_column(name)?
            .iter()
            .enumerate()
            .map(|(row, v)| {
                v.ok_or_else(|| DataError::MissingValue {
                    row,
                    column: name.to_string(),
                })
            })
            .collect()
    }

    /// Dense feature matrix over the named numeric columns.
    pub fn feature_matrix(&self, names: &[String]) -> Result<FeatureMatrix> {
        let cols: Vec<Vec<f64>> = names
            .iter()
            .map(|n| self.dense_numeric(n))
            .collect::<Result<_>>()?;
        Ok(FeatureMatrix::from_columns(names.to_vec(), &cols)?)
    }

    pub fn take_rows(&self, indices: &[usize]) -> TabularDataset {
        TabularDataset {
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    name: c.name.clone(),
                    data: c.data.take(indices),
                })
                .collect(),
            row_count: indices.len(),
            target: self.target.clone(),
        }
    }

    fn retain_columns(&self, keep: impl Fn(&Column) -> bool) -> TabularDataset {
        TabularDataset {
            columns: self.columns.iter().filter(|c| keep(c)).cloned().collect(),
            row_count: self.row_count,
            target: self.target.clone(),
        }
    }

    /// Reads an RFC-4180 CSV with a header row. Empty cells are missing.
    /// A column is numeric when every non-missing cell parses as a finite
    /// number; columns named in `text_columns` are text; the rest categorical.
    pub fn read_csv<R: Read>(reader: R, text_columns: &[&str]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut cells: Vec<Vec<Option<String>>> = vec![Vec::new(); headers.len()];
        for record in rdr.records() {
            let record = record?;
            for (j, col) in cells.iter_mut().enumerate() {
                let cell = record.get(j).unwrap_or("");
                col.push(if cell.is_empty() {
                    None
                } else {
                    Some(cell.to_string())
                });
            }
        }
        let columns = headers
            .into_iter()
            .zip(cells)
            .map(|(name, values)| {
                let data = if text_columns.contains(&name.as_str()) {
                    ColumnData::Text(values)
                } else if let Some(nums) = parse_numeric(&values) {
                    ColumnData::Numeric(nums)
                } else {
                    ColumnData::Categorical(values)
                };
                Column { name, data }
            })
            .collect();
        Self::new(columns, None)
    }

    /// Writes the dataset as CSV. Numbers use shortest round-trip formatting.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        for row in 0..self.row_count {
            wtr.write_record(self.columns.iter().map(|c| c.data.cell_to_string(row)))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv writer emits UTF-8"))
    }
}

fn parse_numeric(values: &[Option<String>]) -> Option<Vec<Option<f64>>> {
    let mut any = false;
    let mut out = Vec::with_capacity(values.len());
    for v in values {
        match v {
            None => out.push(None),
            Some(s) => {
                let x: f64 = s.trim().parse().ok()?;
                if !x.is_finite() {
                    return None;
                }
                any = true;
                out.push(Some(x));
            }
        }
    }
    any.then_some(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub column: String,
    pub fraction: f64,
}

/// Which columns a screening step removed and which survived.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub dropped_uniform: Vec<DroppedColumn>,
    pub dropped_missing: Vec<DroppedColumn>,
    pub dropped_technical: Vec<String>,
    /// Requested technical columns that were not present.
    pub technical_not_found: Vec<String>,
    pub kept: Vec<String>,
}

impl ScreeningReport {
    fn kept_from(ds: &TabularDataset) -> Self {
        ScreeningReport {
            kept: ds.column_names(),
            ..Default::default()
        }
    }

    /// Combines a report with the report of a later step on the output.
    pub fn then(mut self, later: ScreeningReport) -> ScreeningReport {
        self.dropped_uniform.extend(later.dropped_uniform);
        self.dropped_missing.extend(later.dropped_missing);
        self.dropped_technical.extend(later.dropped_technical);
        self.technical_not_found.extend(later.technical_not_found);
        self.kept = later.kept;
        self
    }

    pub fn dropped_names(&self) -> Vec<String> {
        self.dropped_uniform
            .iter()
            .map(|d| d.column.clone())
            .chain(self.dropped_missing.iter().map(|d| d.column.clone()))
            .chain(self.dropped_technical.iter().cloned())
            .collect()
    }
}

/// Fraction of the most frequent value among non-missing cells, or `None`
/// for an all-missing column. Numeric columns report 1.0 only when constant.
fn modal_fraction(column: &Column) -> Option<f64> {
    fn modal<T: std::hash::Hash + Eq>(values: impl Iterator<Item = T>) -> Option<f64> {
        let mut counts: HashMap<T, usize> = HashMap::new();
        let mut total = 0usize;
        for v in values {
            *counts.entry(v).or_default() += 1;
            total += 1;
        }
        let max = counts.values().copied().max()?;
        Some(max as f64 / total as f64)
    }
    match &column.data {
        ColumnData::Numeric(v) => modal(v.iter().flatten().map(|x| x.to_bits())),
        ColumnData::Categorical(v) | ColumnData::Text(v) => modal(v.iter().flatten()),
    }
}

/// Drops near-uniform columns: categorical/text columns whose modal fraction
/// is at least `threshold`, and numeric columns with a single distinct value.
/// The target column is never dropped.
pub fn screen_uniform(ds: &TabularDataset, threshold: f64) -> (TabularDataset, ScreeningReport) {
    let mut report = ScreeningReport::default();
    for c in ds.columns() {
        if Some(c.name.as_str()) == ds.target() {
            continue;
        }
        let Some(fraction) = modal_fraction(c) else {
            continue;
        };
        let uniform = match c.kind() {
            ColumnKind::Numeric => fraction == 1.0,
            _ => fraction >= threshold,
        };
        if uniform {
            report.dropped_uniform.push(DroppedColumn {
                column: c.name.clone(),
                fraction,
            });
        }
    }
    let out = ds.retain_columns(|c| !report.dropped_uniform.iter().any(|d| d.column == c.name));
    report.kept = out.column_names();
    (out, report)
}

/// Drops columns whose missing fraction is strictly greater than `threshold`.
pub fn screen_missing(ds: &TabularDataset, threshold: f64) -> (TabularDataset, ScreeningReport) {
    let mut report = ScreeningReport::default();
    for c in ds.columns() {
        if Some(c.name.as_str()) == ds.target() {
            continue;
        }
        let fraction = c.missing_fraction();
        if fraction > threshold {
            report.dropped_missing.push(DroppedColumn {
                column: c.name.clone(),
                fraction,
            });
        }
    }
    let out = ds.retain_columns(|c| !report.dropped_missing.iter().any(|d| d.column == c.name));
    report.kept = out.column_names();
    (out, report)
}

/// Removes the listed columns; names not present are recorded, not errors.
pub fn drop_technical<S: AsRef<str>>(
    ds: &TabularDataset,
    names: &[S],
) -> (TabularDataset, ScreeningReport) {
    let mut report = ScreeningReport::default();
    for name in names {
        let name = name.as_ref();
        if ds.columns().iter().any(|c| c.name == name) {
            if !report.dropped_technical.iter().any(|n| n == name) {
                report.dropped_technical.push(name.to_string());
            }
        } else {
            report.technical_not_found.push(name.to_string());
        }
    }
    let out = ds.retain_columns(|c| !report.dropped_technical.contains(&c.name));
    report.kept = out.column_names();
    (out, report)
}

/// Identity report for a dataset (nothing dropped).
pub fn identity_report(ds: &TabularDataset) -> ScreeningReport {
    ScreeningReport::kept_from(ds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEntry {
    pub value: String,
    /// Percentage (0–100) of non-missing rows.
    pub percent: f64,
    pub count: usize,
}

/// The `top_k` most frequent values, descending, ties broken lexicographically.
pub fn frequency_table(
    ds: &TabularDataset,
    column: &str,
    top_k: usize,
) -> Result<Vec<FrequencyEntry>> {
    let values = ds.string_column(column)?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut total = 0usize;
    for v in values.iter().flatten() {
        *counts.entry(v.as_str()).or_default() += 1;
        total += 1;
    }
    let mut entries: Vec<(&str, usize)> = counts.into_iter().collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    Ok(entries
        .into_iter()
        .take(top_k)
        .map(|(value, count)| FrequencyEntry {
            value: value.to_string(),
            percent: 100.0 * count as f64 / total as f64,
            count,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramData {
    pub column: String,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl HistogramData {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Equal-width histogram over non-missing values. Bins are left-closed
/// except the last, which is closed on both sides. A constant column yields
/// a single bin widened by machine epsilon around the value.
pub fn histogram_values(column: &str, values: &[f64], bin_count: usize) -> Result<HistogramData> {
    if bin_count == 0 {
        return Err(DataError::ZeroBins);
    }
    if values.is_empty() {
        return Err(DataError::AllMissing(column.to_string()));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        let pad = f64::EPSILON * lo.abs().max(1.0);
        return Ok(HistogramData {
            column: column.to_string(),
            edges: vec![lo - pad, hi + pad],
            counts: vec![values.len()],
        });
    }
    let width = (hi - lo) / bin_count as f64;
    let mut edges: Vec<f64> = (0..bin_count).map(|i| lo + i as f64 * width).collect();
    edges.push(hi);
    let mut counts = vec![0usize; bin_count];
    for &v in values {
        let mut idx = (((v - lo) / width).floor() as usize).min(bin_count - 1);
        while idx > 0 && v < edges[idx] {
            idx -= 1;
        }
        while idx + 1 < bin_count && v >= edges[idx + 1] {
            idx += 1;
        }
        counts[idx] += 1;
    }
    Ok(HistogramData {
        column: column.to_string(),
        edges,
        counts,
    })
}

pub fn histogram(ds: &TabularDataset, column: &str, bin_count: usize) -> Result<HistogramData> {
    let values: Vec<f64> = ds
        .numeric_column(column)?
        .iter()
        .flatten()
        .copied()
        .collect();
    histogram_values(column, &values, bin_count)
}

/// Pearson correlations. Entries involving a constant column (zero variance
/// over the complete pairs) are reported as 0 and listed in `constant_pairs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub constant_pairs: Vec<(String, String)>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == a)?;
        let j = self.labels.iter().position(|l| l == b)?;
        Some(self.values[i][j])
    }
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pairwise-complete Pearson correlation matrix.
pub fn correlation_matrix<S: AsRef<str>>(
    ds: &TabularDataset,
    columns: &[S],
) -> Result<CorrelationMatrix> {
    if columns.len() < 2 {
        return Err(DataError::TooFewColumns(columns.len()));
    }
    let data: Vec<&[Option<f64>]> = columns
        .iter()
        .map(|c| ds.numeric_column(c.as_ref()))
        .collect::<Result<_>>()?;
    let p = columns.len();
    let mut values = vec![vec![0.0; p]; p];
    let mut constant_pairs = Vec::new();
    for i in 0..p {
        values[i][i] = 1.0;
        for j in (i + 1)..p {
            let (x, y): (Vec<f64>, Vec<f64>) = data[i]
                .iter()
                .zip(data[j])
                .filter_map(|(a, b)| Some(((*a)?, (*b)?)))
                .unzip();
            let (a, b) = (columns[i].as_ref(), columns[j].as_ref());
            if x.len() < 2 {
                return Err(DataError::TooFewRows(a.to_string(), b.to_string()));
            }
            let r = match pearson(&x, &y) {
                Some(r) => r,
                None => {
                    constant_pairs.push((a.to_string(), b.to_string()));
                    0.0
                }
            };
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        labels: columns.iter().map(|c| c.as_ref().to_string()).collect(),
        values,
        constant_pairs,
    })
}

/// Uniform random hold-out of `n` rows without replacement. Both parts keep
/// the original row order.
pub fn split_holdout(
    ds: &TabularDataset,
    n: usize,
    seed: u64,
) -> Result<(TabularDataset, TabularDataset)> {
    let rows = ds.row_count();
    if n == 0 || n >= rows {
        return Err(DataError::HoldoutSize { n, rows });
    }
    let mut rng = rng_for(seed, 0);
    let mut picked = sample(&mut rng, rows, n).into_vec();
    picked.sort_unstable();
    let mut is_holdout = vec![false; rows];
    for &i in &picked {
        is_holdout[i] = true;
    }
    let train: Vec<usize> = (0..rows).filter(|&i| !is_holdout[i]).collect();
    Ok((ds.take_rows(&train), ds.take_rows(&picked)))
}

/// Converts integral 1..5 ratings to class levels `"1"`..`"5"`.
pub fn to_class_target(ratings: &[f64]) -> Result<Vec<String>> {
    ratings
        .iter()
        .enumerate()
        .map(|(row, &value)| {
            if value.fract() == 0.0 && (1.0..=5.0).contains(&value) {
                Ok(format!("{}", value as i64))
            } else {
                Err(DataError::BadRating { row, value })
            }
        })
        .collect()
}

/// Name of the rating column in feature tables.
pub const RATING_COLUMN: &str = "rating";

/// Per-label emission model for the synthetic corpus: the probability that
/// a token carries the label is `base * exp(slope * z)` for latent
/// satisfaction `z`.
const SYNTH_EMISSION: [(f64, f64); 10] = [
    (0.009, -0.75), // anger
    (0.040, 0.05),  // anticipation
    (0.007, -0.85), // disgust
    (0.011, -0.55), // fear
    (0.055, 0.40),  // joy
    (0.011, -0.65), // sadness
    (0.018, 0.04),  // surprise
    (0.060, 0.22),  // trust
    (0.028, -0.62), // negative
    (0.095, 0.32),  // positive
];

/// Cut points on the latent rating scale (unit variance); class shares are
/// roughly 7%, 6%, 13%, 26% and 48% for ratings 1..5.
const SYNTH_CUTS: [f64; 4] = [-1.476, -1.165, -0.613, 0.050];

const SYNTH_RATING_NOISE: f64 = 0.75;

/// Deterministic stand-in for the review feature table: ten token-normalized
/// sentiment columns plus an integral `rating` target in 1..5.
///
/// Each review draws a latent satisfaction `z ~ N(0, 1)` and a length of
/// 20–160 tokens; every label count is binomial in the length with a
/// `z`-dependent rate. Rare negative labels produce a point mass at zero,
/// frequent positive labels are roughly bell-shaped. The rating thresholds
/// `z + noise` so that five stars is the majority class.
pub fn generate_synthetic_reviews(n: usize, seed: u64) -> Result<TabularDataset> {
    if n < 10 {
        return Err(DataError::TooFewSyntheticRows(n));
    }
    let mut rng = rng_for(seed, 0x5EED);
    let mut columns: Vec<Vec<Option<f64>>> = (0..10).map(|_| Vec::with_capacity(n)).collect();
    let mut ratings = Vec::with_capacity(n);
    let latent_sd = (1.0 + SYNTH_RATING_NOISE * SYNTH_RATING_NOISE).sqrt();
    for _ in 0..n {
        let z: f64 = rng.sample(StandardNormal);
        let tokens: u64 = rng.random_range(20..=160);
        for (col, &(base, slope)) in columns.iter_mut().zip(SYNTH_EMISSION.iter()) {
            let p = (base * (slope * z).exp()).min(0.5);
            let count = Binomial::new(tokens, p)
                .expect("probability is in [0, 0.5]")
                .sample(&mut rng);
            col.push(Some(count as f64 / tokens as f64));
        }
        let noise: f64 = rng.sample(StandardNormal);
        let latent = (z + SYNTH_RATING_NOISE * noise) / latent_sd;
        let rating = 1 + SYNTH_CUTS.iter().filter(|&&c| latent > c).count();
        ratings.push(Some(rating as f64));
    }
    let mut cols: Vec<Column> = SentimentLabel::ALL
        .iter()
        .zip(columns)
        .map(|(l, v)| Column::numeric(l.as_str(), v))
        .collect();
    cols.push(Column::numeric(RATING_COLUMN, ratings));
    TabularDataset::new(cols, Some(RATING_COLUMN.to_string()))
}
