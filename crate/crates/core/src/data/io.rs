use std::collections::HashMap;
use std::path::Path;

use super::{Column, ColumnType, DataError, DataFile};

/// Declared column types for a delimited file.
#[derive(Clone, Debug, PartialEq)]
pub struct Schema {
    pub columns: Vec<(String, ColumnType)>,
    pub block_column: String,
}

impl Schema {
    pub fn new(columns: Vec<(String, ColumnType)>, block_column: impl Into<String>) -> Self {
        Schema {
            columns,
            block_column: block_column.into(),
        }
    }
}

fn csv_err(path: &Path, e: csv::Error) -> DataError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => DataError::Io {
            path: path.display().to_string(),
            source,
        },
        other => DataError::Csv {
            path: path.display().to_string(),
            message: format!("{other:?}"),
        },
    }
}

fn read_raw(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), DataError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let header = rdr
        .headers()
        .map_err(|e| csv_err(path, e))?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Reads a comma-delimited file with one header row.
///
/// The header must name exactly the schema's columns (in any order); the
/// returned columns follow header order. Empty cells become missing values,
/// which the block column may not contain. Row numbers in errors are 0-based
/// record indices, not counting the header.
pub fn load_table(path: impl AsRef<Path>, schema: &Schema) -> Result<DataFile, DataError> {
    let path = path.as_ref();
    let (header, rows) = read_raw(path)?;

    let declared: HashMap<&str, ColumnType> = schema
        .columns
        .iter()
        .map(|(n, t)| (n.as_str(), *t))
        .collect();
    if declared.len() != schema.columns.len() {
        return Err(DataError::Header("schema declares a column twice".into()));
    }
    if header.len() != declared.len() {
        return Err(DataError::Header(format!(
            "file has {} columns, schema declares {}",
            header.len(),
            declared.len()
        )));
    }
    let mut kinds = Vec::with_capacity(header.len());
    for name in &header {
        match declared.get(name.as_str()) {
            Some(k) => kinds.push(*k),
            None => {
                return Err(DataError::Header(format!(
                    "column {name} is not in the schema"
                )))
            }
        }
    }
    let block_pos = header
        .iter()
        .position(|h| *h == schema.block_column)
        .ok_or_else(|| DataError::Header(format!("no block column {}", schema.block_column)))?;

    let mut values: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(rows.len()); header.len()];
    for (r, row) in rows.iter().enumerate() {
        for (c, raw) in row.iter().enumerate() {
            let cell = if raw.is_empty() {
                if c == block_pos {
                    return Err(DataError::MissingBlockId(r));
                }
                None
            } else {
                Some(kinds[c].parse_cell(raw).ok_or_else(|| DataError::Parse {
                    row: r,
                    column: header[c].clone(),
                    kind: kinds[c],
                    value: raw.clone(),
                })?)
            };
            values[c].push(cell);
        }
    }
    let columns = header
        .into_iter()
        .zip(kinds)
        .zip(values)
        .map(|((name, kind), vals)| Column::new(name, kind, vals))
        .collect();
    DataFile::new(file_stem(path), columns, &schema.block_column)
}

/// Guesses column types from content: integers in {0,1} are binary, other
/// non-negative integers are counts, anything else is continuous. The block
/// column is always an identifier.
pub fn infer_schema(path: impl AsRef<Path>, block_column: &str) -> Result<Schema, DataError> {
    let path = path.as_ref();
    let (header, rows) = read_raw(path)?;
    let columns = header
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let kind = if name == block_column {
                ColumnType::Identifier
            } else {
                infer_kind(rows.iter().map(|r| r[c].as_str()))
            };
            (name.clone(), kind)
        })
        .collect();
    Ok(Schema::new(columns, block_column))
}

fn infer_kind<'a>(cells: impl Iterator<Item = &'a str>) -> ColumnType {
    let mut binary = true;
    let mut count = true;
    let mut any = false;
    for raw in cells.filter(|s| !s.is_empty()) {
        any = true;
        match raw.parse::<u64>() {
            Ok(v) => binary &= v <= 1,
            Err(_) => {
                binary = false;
                count = false;
            }
        }
    }
    match (any, binary, count) {
        (true, true, _) => ColumnType::Binary,
        (true, false, true) => ColumnType::Count,
        _ => ColumnType::Continuous,
    }
}

/// [`infer_schema`] followed by [`load_table`].
pub fn load_table_inferred(path: impl AsRef<Path>, block_column: &str) -> Result<DataFile, DataError> {
    let schema = infer_schema(path.as_ref(), block_column)?;
    load_table(path, &schema)
}

pub(crate) fn format_cell(kind: ColumnType, v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(v) if kind.is_integral() => format!("{}", v as u64),
        // Shortest representation that parses back to the same bits.
        Some(v) => format!("{v}"),
    }
}

/// Writes `file` in the same delimited convention [`load_table`] reads.
pub fn write_table(file: &DataFile, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(file.columns().iter().map(|c| c.name.as_str()))
        .map_err(|e| csv_err(path, e))?;
    for r in 0..file.len() {
        w.write_record(
            file.columns()
                .iter()
                .map(|c| format_cell(c.kind, c.values[r])),
        )
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        p
    }

    fn weight_schema() -> Schema {
        Schema::new(
            vec![
                ("WEIGHT".into(), ColumnType::Count),
                ("block".into(), ColumnType::Identifier),
            ],
            "block",
        )
    }

    #[test]
    fn loads_five_rows() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "a.csv",
            "WEIGHT,block\n202,1\n260,2\n175,3\n275,4\n161,5\n",
        );
        let f = load_table(&p, &weight_schema()).unwrap();
        assert_eq!(f.len(), 5);
        assert_eq!(f.name(), "a");
        assert_eq!(f.value(0, 3), Some(275.0));
    }

    #[test]
    fn rejects_missing_block_id() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "WEIGHT,block\n202,1\n260,\n");
        let err = load_table(&p, &weight_schema()).unwrap_err();
        assert_eq!(err.to_string(), "missing block id at row 1");
    }

    #[test]
    fn missing_covariate_cells_allowed() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "WEIGHT,block\n,1\n260,2\n");
        let f = load_table(&p, &weight_schema()).unwrap();
        assert_eq!(f.value(0, 0), None);
    }

    #[test]
    fn parse_error_has_location() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "WEIGHT,block\n202,1\n2.5,2\n");
        match load_table(&p, &weight_schema()).unwrap_err() {
            DataError::Parse { row, column, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "WEIGHT");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn header_mismatch_and_unreadable() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "HEIGHT,block\n1,1\n");
        assert!(matches!(
            load_table(&p, &weight_schema()),
            Err(DataError::Header(_))
        ));
        assert!(matches!(
            load_table(dir.path().join("nope.csv"), &weight_schema()),
            Err(DataError::Io { .. })
        ));
    }

    #[test]
    fn inference() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "b.csv", "y,d,c,block\n1.5,0,3,1\n2,1,0,1\n,1,7,2\n");
        let s = infer_schema(&p, "block").unwrap();
        let kinds: Vec<_> = s.columns.iter().map(|(_, k)| *k).collect();
        assert_eq!(
            kinds,
            vec![
                ColumnType::Continuous,
                ColumnType::Binary,
                ColumnType::Count,
                ColumnType::Identifier
            ]
        );
    }

    proptest! {
        #[test]
        fn write_then_load_round_trips(
            rows in prop::collection::vec(
                (prop::option::of(-1e12f64..1e12), prop::option::of(0u32..100_000), 0u32..50),
                1..40,
            )
        ) {
            let cont = rows.iter().map(|r| r.0).collect();
            let count = rows.iter().map(|r| r.1.map(f64::from)).collect();
            let block = rows.iter().map(|r| Some(f64::from(r.2))).collect();
            let file = DataFile::new("t", vec![
                Column::new("x", ColumnType::Continuous, cont),
                Column::new("k", ColumnType::Count, count),
                Column::new("block", ColumnType::Identifier, block),
            ], "block").unwrap();
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("t.csv");
            write_table(&file, &p).unwrap();
            let schema = Schema::new(vec![
                ("x".into(), ColumnType::Continuous),
                ("k".into(), ColumnType::Count),
                ("block".into(), ColumnType::Identifier),
            ], "block");
            let back = load_table(&p, &schema).unwrap();
            prop_assert_eq!(back, file);
        }
    }
}
