//! Tabular data: schema-driven CSV loading, the fitted preprocessing
//! pipeline (median imputation, one-hot encoding, min-max scaling) and the
//! composite-key stratified split.

mod io;
mod matrix;
mod preprocess;
mod schema;
mod split;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{load_csv, read_csv, write_csv};
pub use matrix::FeatureMatrix;
pub use preprocess::{
    fit_preprocessor, transform, FeatureSpec, FittedPreprocessor, UnknownCategoryPolicy,
    MISSING_CATEGORY,
};
pub use schema::{ColumnKind, ColumnSchema, Schema};
pub use split::{allocate_counts, composite_key, stratified_split, Split, SplitPlan};

#[derive(Debug, Error)]
pub enum TabularError {
    #[error("cannot read `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("file is empty (no header row)")]
    EmptyFile,
    #[error("column `{0}` declared in schema is missing from the header")]
    MissingColumn(String),
    #[error("column `{0}` is not declared in the schema")]
    UnknownColumn(String),
    #[error("row {row}, column `{col}`: cannot parse `{value}`")]
    UnparsableCell { row: usize, col: String, value: String },
    #[error("row {row}, column `{col}`: expected 0 or 1, found `{value}`")]
    NonBinary { row: usize, col: String, value: String },
    #[error("row {row} has {found} cells, expected {expected}")]
    RaggedRow {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("csv: {0}")]
    Csv(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("table has no rows")]
    EmptyTable,
    #[error("numeric column `{0}` has no non-missing training values")]
    AllMissingColumn(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("stratum z={z} has {count} rows; at least 3 are needed")]
    StratumTooSmall { z: u8, count: usize },
    #[error("split needs at least 10 rows, got {0}")]
    TooFewRows(usize),
    #[error("split fractions must be positive and sum to 1, got {0:?}")]
    InvalidFractions(Vec<f64>),
}

/// A single parsed cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Number(f64),
    Label(String),
    Missing,
}

impl Cell {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

/// Parsed records in schema column order.
///
/// `row_ids` identifies each record by its position in the source file so
/// that partitions and fingerprints stay traceable after splitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataTable {
    pub schema: Schema,
    pub rows: Vec<Vec<Cell>>,
    pub row_ids: Vec<usize>,
}

impl DataTable {
    /// Build a table from rows already in schema order, validating arity and
    /// the binary columns.
    pub fn new(schema: Schema, rows: Vec<Vec<Cell>>) -> Result<Self, TabularError> {
        let row_ids = (0..rows.len()).collect();
        let table = Self {
            schema,
            rows,
            row_ids,
        };
        table.check()?;
        Ok(table)
    }

    fn check(&self) -> Result<(), TabularError> {
        let width = self.schema.len();
        let binary: Vec<usize> = (0..width).filter(|&c| self.schema.is_binary(c)).collect();
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != width {
                return Err(TabularError::RaggedRow {
                    row: r,
                    found: row.len(),
                    expected: width,
                });
            }
            for &c in &binary {
                match row[c] {
                    Cell::Number(v) if v == 0.0 || v == 1.0 => {}
                    ref other => {
                        return Err(TabularError::NonBinary {
                            row: r,
                            col: self.schema.columns[c].name.clone(),
                            value: format!("{other:?}"),
                        })
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn binary_column(&self, idx: usize) -> Vec<u8> {
        self.rows
            .iter()
            .map(|r| match r[idx] {
                Cell::Number(v) if v == 1.0 => 1,
                _ => 0,
            })
            .collect()
    }

    /// Target labels as 0/1.
    pub fn labels(&self) -> Vec<u8> {
        self.binary_column(self.schema.target_index())
    }

    /// Audited sensitive attribute as 0/1.
    pub fn sensitive(&self) -> Vec<u8> {
        self.binary_column(self.schema.sensitive_index())
    }

    /// Numeric values of a column, `None` where missing or non-numeric.
    pub fn numeric_column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let idx = self.schema.index_of(name)?;
        Some(self.rows.iter().map(|r| r[idx].as_number()).collect())
    }

    /// Rows at the given positions, preserving their ids.
    pub fn select(&self, positions: &[usize]) -> DataTable {
        DataTable {
            schema: self.schema.clone(),
            rows: positions.iter().map(|&i| self.rows[i].clone()).collect(),
            row_ids: positions.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    /// Append the rows of `other`; ids of appended rows continue after the
    /// current maximum so they stay unique.
    pub fn concat(&self, other: &DataTable) -> Result<DataTable, TabularError> {
        if self.schema != other.schema {
            return Err(TabularError::SchemaMismatch(
                "cannot concatenate tables with different schemas".into(),
            ));
        }
        let offset = self.row_ids.iter().max().map_or(0, |m| m + 1);
        let mut out = self.clone();
        out.rows.extend(other.rows.iter().cloned());
        out.row_ids.extend(other.row_ids.iter().map(|id| id + offset));
        Ok(out)
    }

    pub fn fingerprint(&self) -> String {
        crate::hashing::content_hash(self).expect("table serializes")
    }
}
