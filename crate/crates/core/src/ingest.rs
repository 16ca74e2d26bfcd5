//! Data acquisition: read a delimited table and separate the label column.

use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {source_name}: {reason}")]
    Unreadable { source_name: String, reason: String },
    #[error("unsupported format {0:?}; only csv is available")]
    UnsupportedFormat(String),
    #[error("{0} contains no data rows")]
    Empty(String),
    #[error("row {row} has {found} fields, expected {expected}")]
    Ragged {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("malformed csv: {0}")]
    Malformed(String),
    #[error("label column {selector} does not exist in a table of {n_cols} columns")]
    NoSuchColumn { selector: String, n_cols: usize },
    #[error("non-numeric value {token:?} in feature column {column:?} (row {row})")]
    NonNumeric {
        row: usize,
        column: String,
        token: String,
    },
    #[error("label column {column:?} holds a single distinct value")]
    SingleClass { column: String },
    #[error("test table has {found} columns; expected {features} (features) or {with_label} (features + label)")]
    ColumnMismatch {
        found: usize,
        features: usize,
        with_label: usize,
    },
}

type Result<T> = std::result::Result<T, IngestError>;

/// Input encodings understood by [`acquire`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
}

impl Format {
    /// Infer the format from a path or URL extension.
    pub fn infer(source: &str) -> Option<Format> {
        let trimmed = source.split(['?', '#']).next().unwrap_or(source);
        let ext = Path::new(trimmed).extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "csv" | "data" | "txt" => Some(Format::Csv),
            _ => None,
        }
    }
}

impl std::str::FromStr for Format {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            other => Err(IngestError::UnsupportedFormat(other.to_string())),
        }
    }
}

/// Where a table comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Source {
    Path(PathBuf),
    Url(String),
}

impl Source {
    pub fn parse(s: &str) -> Source {
        if s.starts_with("http://") || s.starts_with("https://") {
            Source::Url(s.to_string())
        } else if let Some(path) = s.strip_prefix("file://") {
            Source::Path(PathBuf::from(path))
        } else {
            Source::Path(PathBuf::from(s))
        }
    }

    fn display(&self) -> String {
        match self {
            Source::Path(p) => p.display().to_string(),
            Source::Url(u) => u.clone(),
        }
    }

    fn read_bytes(&self) -> Result<Vec<u8>> {
        match self {
            Source::Path(p) => std::fs::read(p).map_err(|e| IngestError::Unreadable {
                source_name: self.display(),
                reason: e.to_string(),
            }),
            Source::Url(url) => fetch(url),
        }
    }
}

#[cfg(feature = "remote")]
fn fetch(url: &str) -> Result<Vec<u8>> {
    let unreadable = |reason: String| IngestError::Unreadable {
        source_name: url.to_string(),
        reason,
    };
    let mut response = ureq::get(url).call().map_err(|e| unreadable(e.to_string()))?;
    response
        .body_mut()
        .read_to_vec()
        .map_err(|e| unreadable(e.to_string()))
}

#[cfg(not(feature = "remote"))]
fn fetch(url: &str) -> Result<Vec<u8>> {
    Err(IngestError::Unreadable {
        source_name: url.to_string(),
        reason: "built without the `remote` feature".into(),
    })
}

/// A rectangular grid of text cells with column names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawTable {
    column_names: Vec<String>,
    cells: Vec<Vec<String>>,
}

impl RawTable {
    pub fn new(column_names: Vec<String>, cells: Vec<Vec<String>>) -> Result<RawTable> {
        let expected = column_names.len();
        if let Some((row, r)) = cells.iter().enumerate().find(|(_, r)| r.len() != expected) {
            return Err(IngestError::Ragged {
                row,
                found: r.len(),
                expected,
            });
        }
        Ok(RawTable {
            column_names,
            cells,
        })
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.cells
    }

    pub fn n_rows(&self) -> usize {
        self.cells.len()
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }
}

/// Read and parse a table. `has_header = None` infers header presence.
pub fn acquire(source: &Source, format: Format, has_header: Option<bool>) -> Result<RawTable> {
    let bytes = source.read_bytes()?;
    match format {
        Format::Csv => parse_csv(&bytes, has_header).map_err(|e| match e {
            IngestError::Empty(_) => IngestError::Empty(source.display()),
            other => other,
        }),
    }
}

/// Parse CSV bytes: comma delimiter, optional double quotes, `\n` or `\r\n`.
pub fn parse_csv(bytes: &[u8], has_header: Option<bool>) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut rows: Vec<Vec<String>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::Malformed(e.to_string()))?;
        // A bare newline at the end of the file, or a blank line.
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        rows.push(record.iter().map(|c| c.trim().to_string()).collect());
    }
    if rows.is_empty() {
        return Err(IngestError::Empty("input".into()));
    }

    let header = has_header.unwrap_or_else(|| infer_header(&rows));
    let width = rows[0].len();
    let (column_names, body) = if header {
        let names = rows[0]
            .iter()
            .enumerate()
            .map(|(j, n)| {
                if n.is_empty() {
                    format!("col{j}")
                } else {
                    n.clone()
                }
            })
            .collect();
        (names, rows.split_off(1))
    } else {
        ((0..width).map(|j| format!("col{j}")).collect(), rows)
    };
    if body.is_empty() {
        return Err(IngestError::Empty("input".into()));
    }
    if let Some((i, r)) = body.iter().enumerate().find(|(_, r)| r.len() != width) {
        return Err(IngestError::Ragged {
            row: i,
            found: r.len(),
            expected: width,
        });
    }
    RawTable::new(column_names, body)
}

/// A first row is a header when some column holds text there but a number
/// (or a missing marker) in the second row. Columns that are textual in the
/// second row too — the label column, typically — carry no evidence.
fn infer_header(rows: &[Vec<String>]) -> bool {
    let Some(second) = rows.get(1) else {
        return rows[0].iter().any(|t| !is_missing(t) && parse_number(t).is_none());
    };
    rows[0].iter().zip(second).any(|(first, second)| {
        let second_numeric = is_missing(second) || parse_number(second).is_some();
        let first_text = !is_missing(first) && parse_number(first).is_none();
        second_numeric && first_text
    })
}

pub(crate) fn is_missing(token: &str) -> bool {
    let t = token.trim();
    t.is_empty() || t == "?"
}

fn parse_number(token: &str) -> Option<f64> {
    token.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Which column holds the class labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LabelColumn {
    Index(usize),
    #[default]
    Last,
}

impl LabelColumn {
    pub fn resolve(self, n_cols: usize) -> Result<usize> {
        match self {
            LabelColumn::Last if n_cols > 0 => Ok(n_cols - 1),
            LabelColumn::Index(i) if i < n_cols => Ok(i),
            _ => Err(IngestError::NoSuchColumn {
                selector: self.to_string(),
                n_cols,
            }),
        }
    }
}

impl std::fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Last => f.write_str("last"),
        }
    }
}

impl std::str::FromStr for LabelColumn {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("last") {
            return Ok(LabelColumn::Last);
        }
        s.parse::<usize>()
            .map(LabelColumn::Index)
            .map_err(|_| format!("expected a column index or `last`, got {s:?}"))
    }
}

/// Numeric features, encoded labels and the bookkeeping needed to decode them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Option<Vec<usize>>,
    feature_names: Vec<String>,
    class_names: Vec<String>,
    missing: Array2<bool>,
}

impl Dataset {
    /// Labeled dataset without missing cells. Class names are `"0"`, `"1"`, ….
    pub fn labeled(features: Array2<f64>, labels: Vec<usize>) -> Dataset {
        assert_eq!(features.nrows(), labels.len(), "row/label count mismatch");
        let n_classes = labels.iter().max().map_or(0, |m| m + 1);
        let missing = Array2::from_elem(features.raw_dim(), false);
        Dataset {
            feature_names: (0..features.ncols()).map(|j| format!("f{j}")).collect(),
            class_names: (0..n_classes).map(|c| c.to_string()).collect(),
            features,
            labels: Some(labels),
            missing,
        }
    }

    /// Unlabeled dataset without missing cells.
    pub fn unlabeled(features: Array2<f64>, class_names: Vec<String>) -> Dataset {
        let missing = Array2::from_elem(features.raw_dim(), false);
        Dataset {
            feature_names: (0..features.ncols()).map(|j| format!("f{j}")).collect(),
            class_names,
            features,
            labels: None,
            missing,
        }
    }

    /// Replace the missing mask. Masked cells keep whatever value `features` holds.
    pub fn with_missing(mut self, missing: Array2<bool>) -> Dataset {
        assert_eq!(missing.raw_dim(), self.features.raw_dim());
        self.missing = missing;
        self
    }

    pub fn with_names(mut self, feature_names: Vec<String>, class_names: Vec<String>) -> Dataset {
        assert_eq!(feature_names.len(), self.features.ncols());
        self.feature_names = feature_names;
        self.class_names = class_names;
        self
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn missing(&self) -> &Array2<bool> {
        &self.missing
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    pub fn decode(&self, labels: &[usize]) -> Vec<String> {
        labels.iter().map(|&l| self.class_names[l].clone()).collect()
    }

    /// New dataset of the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select(Axis(0), rows),
            labels: self
                .labels
                .as_ref()
                .map(|l| rows.iter().map(|&r| l[r]).collect()),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            missing: self.missing.select(Axis(0), rows),
        }
    }

    /// New dataset restricted to the columns whose mask bit is set.
    pub fn select_columns(&self, keep: &[bool]) -> Dataset {
        assert_eq!(keep.len(), self.n_features());
        if keep.iter().all(|&k| k) {
            return self.clone();
        }
        let cols: Vec<usize> = (0..keep.len()).filter(|&j| keep[j]).collect();
        Dataset {
            features: self.features.select(Axis(1), &cols),
            labels: self.labels.clone(),
            feature_names: cols.iter().map(|&j| self.feature_names[j].clone()).collect(),
            class_names: self.class_names.clone(),
            missing: self.missing.select(Axis(1), &cols),
        }
    }

    pub(crate) fn with_features(&self, features: Array2<f64>, missing: Array2<bool>) -> Dataset {
        Dataset {
            features,
            labels: self.labels.clone(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
            missing,
        }
    }
}

/// Split a table into numeric features and first-appearance-encoded labels.
pub fn split_label(table: &RawTable, label_column: LabelColumn) -> Result<Dataset> {
    let label_idx = label_column.resolve(table.n_cols())?;
    let mut class_names: Vec<String> = Vec::new();
    let labels: Vec<usize> = table
        .rows()
        .iter()
        .map(|row| {
            let token = &row[label_idx];
            match class_names.iter().position(|c| c == token) {
                Some(i) => i,
                None => {
                    class_names.push(token.clone());
                    class_names.len() - 1
                }
            }
        })
        .collect();
    if class_names.len() < 2 {
        return Err(IngestError::SingleClass {
            column: table.column_names()[label_idx].clone(),
        });
    }
    let feature_cols: Vec<usize> = (0..table.n_cols()).filter(|&j| j != label_idx).collect();
    let (features, missing) = parse_features(table, &feature_cols)?;
    Ok(Dataset {
        features,
        labels: Some(labels),
        feature_names: feature_cols
            .iter()
            .map(|&j| table.column_names()[j].clone())
            .collect(),
        class_names,
        missing,
    })
}

/// Read an unlabeled table against a training schema. The table may carry
/// the label column (it is dropped; its values are kept when every one of
/// them is a known class) or only the feature columns.
pub fn split_test(table: &RawTable, train: &Dataset, label_column: LabelColumn) -> Result<Dataset> {
    let n_features = train.n_features();
    let (feature_cols, labels) = if table.n_cols() == n_features + 1 {
        let label_idx = label_column.resolve(table.n_cols())?;
        let labels: Option<Vec<usize>> = table
            .rows()
            .iter()
            .map(|r| train.class_names().iter().position(|c| *c == r[label_idx]))
            .collect();
        (
            (0..table.n_cols()).filter(|&j| j != label_idx).collect::<Vec<_>>(),
            labels,
        )
    } else if table.n_cols() == n_features {
        ((0..n_features).collect(), None)
    } else {
        return Err(IngestError::ColumnMismatch {
            found: table.n_cols(),
            features: n_features,
            with_label: n_features + 1,
        });
    };
    let (features, missing) = parse_features(table, &feature_cols)?;
    Ok(Dataset {
        features,
        labels,
        feature_names: train.feature_names().to_vec(),
        class_names: train.class_names().to_vec(),
        missing,
    })
}

fn parse_features(table: &RawTable, cols: &[usize]) -> Result<(Array2<f64>, Array2<bool>)> {
    let n = table.n_rows();
    let mut features = Array2::<f64>::zeros((n, cols.len()));
    let mut missing = Array2::from_elem((n, cols.len()), false);
    for (i, row) in table.rows().iter().enumerate() {
        for (out_j, &j) in cols.iter().enumerate() {
            let token = &row[j];
            if is_missing(token) {
                missing[[i, out_j]] = true;
                continue;
            }
            features[[i, out_j]] = parse_number(token).ok_or_else(|| IngestError::NonNumeric {
                row: i,
                column: table.column_names()[j].clone(),
                token: token.clone(),
            })?;
        }
    }
    Ok((features, missing))
}
