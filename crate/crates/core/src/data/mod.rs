//! Typed tabular records, delimited-file ingestion, and block indexing.
//!
//! Every cell is stored as an `Option<f64>`: integer-valued column kinds
//! (count, binary, identifier) hold exact integers well inside the 2^53
//! range, and `None` marks a missing cell.

mod blocks;
mod io;

pub use blocks::{count_permutations, BlockId, BlockIndex, BlockRows};
pub use io::{infer_schema, load_table, load_table_inferred, write_table, Schema};

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed delimited input in {path}: {message}")]
    Csv { path: String, message: String },
    #[error("header mismatch: {0}")]
    Header(String),
    #[error("cannot parse {value:?} as {kind} at row {row}, column {column}")]
    Parse {
        row: usize,
        column: String,
        kind: ColumnType,
        value: String,
    },
    #[error("missing block id at row {0}")]
    MissingBlockId(usize),
    #[error("column {column} has {actual} values, expected {expected}")]
    Length {
        column: String,
        expected: usize,
        actual: usize,
    },
    #[error("duplicate column name {0}")]
    DuplicateColumn(String),
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("a table needs at least one record")]
    Empty,
    #[error("block column {0} must have identifier type")]
    BlockColumnType(String),
    #[error("unknown column type {0:?}")]
    UnknownType(String),
}

/// The value domain of a column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ColumnType {
    Continuous,
    Count,
    Binary,
    Identifier,
}

impl ColumnType {
    /// Whether `v` belongs to the column's domain.
    pub fn admits(self, v: f64) -> bool {
        match self {
            ColumnType::Continuous => v.is_finite(),
            ColumnType::Count | ColumnType::Identifier => {
                v.is_finite() && v >= 0.0 && v.fract() == 0.0
            }
            ColumnType::Binary => v == 0.0 || v == 1.0,
        }
    }

    fn parse_cell(self, raw: &str) -> Option<f64> {
        let v = match self {
            ColumnType::Continuous => raw.parse::<f64>().ok()?,
            // Accept "3" and "3.0" for integral kinds, nothing fractional.
            _ => match raw.parse::<u64>() {
                Ok(i) => i as f64,
                Err(_) => raw.parse::<f64>().ok()?,
            },
        };
        self.admits(v).then_some(v)
    }

    pub fn is_integral(self) -> bool {
        !matches!(self, ColumnType::Continuous)
    }
}

impl fmt::Display for ColumnType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ColumnType::Continuous => "continuous",
            ColumnType::Count => "count",
            ColumnType::Binary => "binary",
            ColumnType::Identifier => "identifier",
        })
    }
}

impl FromStr for ColumnType {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "continuous" | "real" => Ok(ColumnType::Continuous),
            "count" => Ok(ColumnType::Count),
            "binary" => Ok(ColumnType::Binary),
            "identifier" | "id" => Ok(ColumnType::Identifier),
            _ => Err(DataError::UnknownType(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnType,
    pub values: Vec<Option<f64>>,
}

impl Column {
    pub fn new(name: impl Into<String>, kind: ColumnType, values: Vec<Option<f64>>) -> Self {
        Column {
            name: name.into(),
            kind,
            values,
        }
    }

    /// Column with no missing cells.
    pub fn complete(name: impl Into<String>, kind: ColumnType, values: Vec<f64>) -> Self {
        Column::new(name, kind, values.into_iter().map(Some).collect())
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(Option::is_none)
    }
}

/// A column-typed table with a designated block-identifier column.
#[derive(Clone, Debug, PartialEq)]
pub struct DataFile {
    name: String,
    columns: Vec<Column>,
    n: usize,
    block_column: String,
}

impl DataFile {
    pub fn new(
        name: impl Into<String>,
        columns: Vec<Column>,
        block_column: impl Into<String>,
    ) -> Result<Self, DataError> {
        let block_column = block_column.into();
        let n = columns.first().map_or(0, |c| c.values.len());
        if n == 0 {
            return Err(DataError::Empty);
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(DataError::DuplicateColumn(c.name.clone()));
            }
            if c.values.len() != n {
                return Err(DataError::Length {
                    column: c.name.clone(),
                    expected: n,
                    actual: c.values.len(),
                });
            }
        }
        let block = columns
            .iter()
            .find(|c| c.name == block_column)
            .ok_or_else(|| DataError::UnknownColumn(block_column.clone()))?;
        if block.kind != ColumnType::Identifier {
            return Err(DataError::BlockColumnType(block_column));
        }
        if let Some(row) = block.values.iter().position(Option::is_none) {
            return Err(DataError::MissingBlockId(row));
        }
        Ok(DataFile {
            name: name.into(),
            columns,
            n,
            block_column,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn block_column(&self) -> &str {
        &self.block_column
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn value(&self, column: usize, row: usize) -> Option<f64> {
        self.columns[column].values[row]
    }

    /// Block id of every record, in row order.
    pub fn block_ids(&self) -> Vec<BlockId> {
        let col = self
            .column(&self.block_column)
            .expect("block column checked at construction");
        col.values
            .iter()
            .map(|v| v.expect("block ids are never missing") as BlockId)
            .collect()
    }

    /// Copy of the rows listed in `rows`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<DataFile, DataError> {
        let columns = self
            .columns
            .iter()
            .map(|c| Column::new(&c.name, c.kind, rows.iter().map(|&r| c.values[r]).collect()))
            .collect();
        DataFile::new(&self.name, columns, &self.block_column)
    }

    /// Copy restricted to the named columns, in the order given.
    pub fn select_columns(&self, names: &[&str]) -> Result<DataFile, DataError> {
        let columns = names
            .iter()
            .map(|n| {
                self.column(n)
                    .cloned()
                    .ok_or_else(|| DataError::UnknownColumn(n.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        DataFile::new(&self.name, columns, &self.block_column)
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}
