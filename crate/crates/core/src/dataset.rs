//! Tabular sample ingestion, feature normalization and the mixed
//! categorical/continuous distance used by every downstream stage.
//!
//! Feature vectors are stored as flat `f64` slices. Continuous columns hold
//! their (possibly normalized) value; categorical columns hold the interned
//! category identifier, i.e. the position of the category in the schema's
//! category list. Distances on categorical columns only ever test identifiers
//! for equality.

use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("missing column `{0}` in csv header")]
    MissingColumn(String),
    #[error("row {row}, column `{column}`: cannot parse `{value}` as a number")]
    InvalidNumber {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column `{column}`: category `{value}` is not in the category set")]
    UnknownCategory {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column `{column}`: group value `{value}` is not one of the two declared groups")]
    InvalidGroup {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}, column `{column}`: label `{value}` is not 0 or 1")]
    InvalidLabel {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: expected {expected} fields, found {found}")]
    RowLength {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("table is empty")]
    EmptyTable,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

pub type Result<T> = std::result::Result<T, DatasetError>;

/// Sensitive group. The schema maps its two declared values onto `A` and `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    A,
    B,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::A, Group::B];

    pub fn index(self) -> usize {
        match self {
            Group::A => 0,
            Group::B => 1,
        }
    }

    pub fn from_index(i: usize) -> Group {
        if i == 0 {
            Group::A
        } else {
            Group::B
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnKind {
    Continuous,
    Categorical { categories: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Continuous,
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        categories: impl IntoIterator<Item = S>,
    ) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Categorical {
                categories: categories.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ColumnKind::Categorical { .. })
    }
}

/// Column layout of a sample file.
///
/// `group_values[0]` is mapped to [`Group::A`] and `group_values[1]` to
/// [`Group::B`]. Labels are read literally and must be `0` or `1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub columns: Vec<ColumnSpec>,
    pub group_column: String,
    pub group_values: [String; 2],
    pub label_column: String,
}

impl FeatureSchema {
    pub fn new(
        columns: Vec<ColumnSpec>,
        group_column: impl Into<String>,
        group_values: [&str; 2],
        label_column: impl Into<String>,
    ) -> Result<Self> {
        let schema = FeatureSchema {
            columns,
            group_column: group_column.into(),
            group_values: [group_values[0].to_string(), group_values[1].to_string()],
            label_column: label_column.into(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let schema: FeatureSchema =
            serde_json::from_str(s).map_err(|e| DatasetError::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(DatasetError::Schema("at least one feature column is required".into()));
        }
        if self.group_values[0] == self.group_values[1] {
            return Err(DatasetError::Schema("the two group values must differ".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for name in self
            .columns
            .iter()
            .map(|c| c.name.as_str())
            .chain([self.group_column.as_str(), self.label_column.as_str()])
        {
            if !seen.insert(name) {
                return Err(DatasetError::Schema(format!("duplicate column name `{name}`")));
            }
        }
        for col in &self.columns {
            if let ColumnKind::Categorical { categories } = &col.kind {
                if categories.is_empty() {
                    return Err(DatasetError::Schema(format!(
                        "categorical column `{}` has an empty category set",
                        col.name
                    )));
                }
                let distinct: std::collections::HashSet<_> = categories.iter().collect();
                if distinct.len() != categories.len() {
                    return Err(DatasetError::Schema(format!(
                        "categorical column `{}` repeats a category",
                        col.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    /// Per-column categorical mask, the only schema information the distance needs.
    pub fn metric(&self) -> MixedMetric {
        MixedMetric::new(self.columns.iter().map(ColumnSpec::is_categorical).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub group: Group,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleTable {
    pub schema: FeatureSchema,
    pub rows: Vec<Sample>,
}

impl SampleTable {
    /// Builds a table, checking every row against the schema.
    pub fn new(schema: FeatureSchema, rows: Vec<Sample>) -> Result<Self> {
        for (r, row) in rows.iter().enumerate() {
            check_row(&schema, r, row)?;
        }
        Ok(SampleTable { schema, rows })
    }

    pub fn count(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Number of distinct feature vectors (bitwise comparison).
    pub fn distinct_feature_count(&self) -> usize {
        let mut keys: Vec<Vec<u64>> = self
            .rows
            .iter()
            .map(|r| r.features.iter().map(|v| v.to_bits()).collect())
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys.len()
    }
}

fn check_row(schema: &FeatureSchema, r: usize, row: &Sample) -> Result<()> {
    if row.features.len() != schema.dim() {
        return Err(DatasetError::RowLength {
            row: r,
            expected: schema.dim(),
            found: row.features.len(),
        });
    }
    if row.label > 1 {
        return Err(DatasetError::InvalidLabel {
            row: r,
            column: schema.label_column.clone(),
            value: row.label.to_string(),
        });
    }
    for (col, &v) in schema.columns.iter().zip(&row.features) {
        match &col.kind {
            ColumnKind::Continuous if !v.is_finite() => {
                return Err(DatasetError::InvalidNumber {
                    row: r,
                    column: col.name.clone(),
                    value: v.to_string(),
                })
            }
            ColumnKind::Categorical { categories } => {
                if v.fract() != 0.0 || v < 0.0 || v as usize >= categories.len() {
                    return Err(DatasetError::UnknownCategory {
                        row: r,
                        column: col.name.clone(),
                        value: v.to_string(),
                    });
                }
            }
            _ => {}
        }
    }
    Ok(())
}

/// Reads a comma-separated sample file. Row indices in errors are 0-based
/// positions among the data rows (the header is not counted).
pub fn load_samples(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<SampleTable> {
    read_samples(File::open(path)?, schema)
}

pub fn read_samples<R: Read>(reader: R, schema: &FeatureSchema) -> Result<SampleTable> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let position = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DatasetError::MissingColumn(name.to_string()))
    };
    let feature_idx: Vec<usize> = schema
        .columns
        .iter()
        .map(|c| position(&c.name))
        .collect::<Result<_>>()?;
    let group_idx = position(&schema.group_column)?;
    let label_idx = position(&schema.label_column)?;

    let lookups: Vec<Option<HashMap<&str, usize>>> = schema
        .columns
        .iter()
        .map(|c| match &c.kind {
            ColumnKind::Continuous => None,
            ColumnKind::Categorical { categories } => Some(
                categories
                    .iter()
                    .enumerate()
                    .map(|(i, s)| (s.as_str(), i))
                    .collect(),
            ),
        })
        .collect();

    let mut rows = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(DatasetError::RowLength {
                row: r,
                expected: headers.len(),
                found: record.len(),
            });
        }
        let mut features = Vec::with_capacity(schema.dim());
        for ((col, &idx), lookup) in schema.columns.iter().zip(&feature_idx).zip(&lookups) {
            let raw = &record[idx];
            let value = match lookup {
                None => raw
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DatasetError::InvalidNumber {
                        row: r,
                        column: col.name.clone(),
                        value: raw.to_string(),
                    })?,
                Some(map) => *map.get(raw).ok_or_else(|| DatasetError::UnknownCategory {
                    row: r,
                    column: col.name.clone(),
                    value: raw.to_string(),
                })? as f64,
            };
            features.push(value);
        }
        let raw_group = &record[group_idx];
        let group = if raw_group == schema.group_values[0] {
            Group::A
        } else if raw_group == schema.group_values[1] {
            Group::B
        } else {
            return Err(DatasetError::InvalidGroup {
                row: r,
                column: schema.group_column.clone(),
                value: raw_group.to_string(),
            });
        };
        let raw_label = &record[label_idx];
        let label = match raw_label {
            "0" => 0,
            "1" => 1,
            _ => {
                return Err(DatasetError::InvalidLabel {
                    row: r,
                    column: schema.label_column.clone(),
                    value: raw_label.to_string(),
                })
            }
        };
        rows.push(Sample {
            features,
            group,
            label,
        });
    }
    Ok(SampleTable {
        schema: schema.clone(),
        rows,
    })
}

/// Writes the table in the same dialect [`read_samples`] accepts. Continuous
/// values use the shortest representation that round-trips exactly.
pub fn write_samples<W: Write>(table: &SampleTable, writer: W) -> Result<()> {
    let schema = &table.schema;
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
    header.push(&schema.group_column);
    header.push(&schema.label_column);
    wtr.write_record(&header)?;
    for row in &table.rows {
        let mut fields: Vec<String> = schema
            .columns
            .iter()
            .zip(&row.features)
            .map(|(col, &v)| match &col.kind {
                ColumnKind::Continuous => format!("{v:?}"),
                ColumnKind::Categorical { categories } => categories[v as usize].clone(),
            })
            .collect();
        fields.push(schema.group_values[row.group.index()].clone());
        fields.push(row.label.to_string());
        wtr.write_record(&fields)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_samples(table: &SampleTable, path: impl AsRef<Path>) -> Result<()> {
    write_samples(table, File::create(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub mean: f64,
    pub std_dev: f64,
    /// `sqrt(1/2) / std_dev`, or 0 for a zero-variance column.
    pub scale: f64,
}

/// Per-column affine maps taking continuous columns to zero mean and variance 1/2.
/// Categorical columns carry `None` and pass through untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub columns: Vec<Option<ColumnScale>>,
}

impl NormalizationParams {
    pub fn apply_value(&self, column: usize, v: f64) -> f64 {
        match &self.columns[column] {
            Some(s) => (v - s.mean) * s.scale,
            None => v,
        }
    }

    pub fn apply_features(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .enumerate()
            .map(|(c, &v)| self.apply_value(c, v))
            .collect()
    }

    pub fn apply(&self, table: &SampleTable) -> Result<SampleTable> {
        if table.schema.dim() != self.columns.len() {
            return Err(DatasetError::DimensionMismatch {
                expected: self.columns.len(),
                found: table.schema.dim(),
            });
        }
        let rows = table
            .rows
            .iter()
            .map(|r| Sample {
                features: self.apply_features(&r.features),
                group: r.group,
                label: r.label,
            })
            .collect();
        Ok(SampleTable {
            schema: table.schema.clone(),
            rows,
        })
    }
}

/// Fits zero-mean, variance-1/2 scaling with population statistics.
pub fn fit_normalization(table: &SampleTable) -> Result<NormalizationParams> {
    if table.is_empty() {
        return Err(DatasetError::EmptyTable);
    }
    let count = table.count() as f64;
    let columns = table
        .schema
        .columns
        .iter()
        .enumerate()
        .map(|(c, col)| {
            if col.is_categorical() {
                return None;
            }
            let mean = table.rows.iter().map(|r| r.features[c]).sum::<f64>() / count;
            let var = table
                .rows
                .iter()
                .map(|r| {
                    let d = r.features[c] - mean;
                    d * d
                })
                .sum::<f64>()
                / count;
            let std_dev = var.sqrt();
            let degenerate = std_dev <= 1e-12 * mean.abs().max(1.0);
            let scale = if degenerate {
                0.0
            } else {
                std::f64::consts::FRAC_1_SQRT_2 / std_dev
            };
            Some(ColumnScale {
                mean,
                std_dev,
                scale,
            })
        })
        .collect();
    Ok(NormalizationParams { columns })
}

/// Mean over columns of the per-column distance: inequality indicator for
/// categorical columns, absolute difference for continuous ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixedMetric {
    categorical: Vec<bool>,
}

impl MixedMetric {
    pub fn new(categorical: Vec<bool>) -> Self {
        MixedMetric { categorical }
    }

    /// All-continuous metric of the given dimension.
    pub fn continuous(dim: usize) -> Self {
        MixedMetric {
            categorical: vec![false; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.categorical.len()
    }

    pub fn is_categorical(&self, column: usize) -> bool {
        self.categorical[column]
    }

    /// Unchecked distance; both slices must have length `dim()`.
    #[inline]
    pub fn distance(&self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.categorical.len());
        debug_assert_eq!(v.len(), self.categorical.len());
        let mut total = 0.0;
        for ((&cat, &a), &b) in self.categorical.iter().zip(u).zip(v) {
            total += if cat {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            } else {
                (a - b).abs()
            };
        }
        total / self.categorical.len() as f64
    }

    pub fn checked_distance(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        for w in [u, v] {
            if w.len() != self.dim() {
                return Err(DatasetError::DimensionMismatch {
                    expected: self.dim(),
                    found: w.len(),
                });
            }
        }
        Ok(self.distance(u, v))
    }
}

pub fn mixed_distance(u: &[f64], v: &[f64], schema: &FeatureSchema) -> Result<f64> {
    schema.metric().checked_distance(u, v)
}
