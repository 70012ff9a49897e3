use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{LinkageState, SamplerError};
use crate::data::{BlockId, BlockIndex};

/// Link of an imputed file-A slot to a real file-B record in one sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ImputedLink {
    pub sample: usize,
    pub block: BlockId,
    pub a_row: usize,
    pub b_row: usize,
}

/// Exported permutation samples. `columns[m][a]` is the file-B row linked to
/// file-A row `a` in sample `m`, or `None` when the row is unmatched or its
/// block has no file-B records.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PermutationSet {
    pub n_a: usize,
    pub columns: Vec<Vec<Option<usize>>>,
    pub imputations: Vec<ImputedLink>,
}

impl PermutationSet {
    pub fn new(n_a: usize) -> Self {
        PermutationSet {
            n_a,
            ..Default::default()
        }
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Appends the current state as a new sample.
    pub fn push_state(&mut self, state: &LinkageState) {
        let sample = self.columns.len();
        let mut column = vec![None; self.n_a];
        for block in &state.blocks {
            for (slot, &b) in block.slots.iter().zip(&block.assignment) {
                if !slot.imputed {
                    column[slot.a_row] = b;
                } else if let Some(b_row) = b {
                    self.imputations.push(ImputedLink {
                        sample,
                        block: block.id,
                        a_row: slot.a_row,
                        b_row,
                    });
                }
            }
        }
        self.columns.push(column);
    }

    /// Checks that every sample links each block's observed A rows to
    /// distinct B rows of the same block, and that together with the
    /// imputation log every B row of a linkable block is used exactly once.
    pub fn validate(&self, index: &BlockIndex) -> Result<(), SamplerError> {
        let bad = |m: usize, msg: String| SamplerError::InvalidPermutation { sample: m, message: msg };
        if index.n_a() != self.n_a {
            return Err(bad(0, format!("{} A rows, index has {}", self.n_a, index.n_a())));
        }
        let block_a = index.block_of_a();
        let block_b = index.block_of_b();
        for (m, column) in self.columns.iter().enumerate() {
            if column.len() != self.n_a {
                return Err(bad(m, format!("column has {} entries", column.len())));
            }
            let mut uses = vec![0u32; index.n_b()];
            for (a, entry) in column.iter().enumerate() {
                if let Some(b) = *entry {
                    if b >= index.n_b() {
                        return Err(bad(m, format!("B row {b} out of range")));
                    }
                    if block_b[b] != block_a[a] {
                        return Err(bad(m, format!("A row {a} linked across blocks")));
                    }
                    uses[b] += 1;
                }
            }
            for link in self.imputations.iter().filter(|l| l.sample == m) {
                if link.b_row >= index.n_b() || block_b[link.b_row] != link.block {
                    return Err(bad(m, format!("imputed link to B row {} outside block", link.b_row)));
                }
                uses[link.b_row] += 1;
            }
            for (id, rows) in index.linkable() {
                for &b in &rows.rows_b {
                    if uses[b] != 1 {
                        return Err(bad(m, format!("B row {b} of block {id} used {} times", uses[b])));
                    }
                }
            }
        }
        Ok(())
    }

    /// Writes the `n_A × M` matrix with header `sample_0,…`; unmatched
    /// entries are empty cells.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), SamplerError> {
        let path = path.as_ref();
        let io = |e: std::io::Error| SamplerError::Io(format!("{}: {e}", path.display()));
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        let header: Vec<String> = (0..self.columns.len()).map(|m| format!("sample_{m}")).collect();
        writeln!(out, "{}", header.join(",")).map_err(io)?;
        let mut line = String::new();
        for a in 0..self.n_a {
            line.clear();
            for (m, column) in self.columns.iter().enumerate() {
                if m > 0 {
                    line.push(',');
                }
                if let Some(b) = column[a] {
                    line.push_str(&b.to_string());
                }
            }
            writeln!(out, "{line}").map_err(io)?;
        }
        out.flush().map_err(io)
    }

    /// Writes the imputation log as `sample,block,a_row,b_row`.
    pub fn write_imputations(&self, path: impl AsRef<Path>) -> Result<(), SamplerError> {
        let path = path.as_ref();
        let io = |e: std::io::Error| SamplerError::Io(format!("{}: {e}", path.display()));
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        writeln!(out, "sample,block,a_row,b_row").map_err(io)?;
        for l in &self.imputations {
            writeln!(out, "{},{},{},{}", l.sample, l.block, l.a_row, l.b_row).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    /// Reads a matrix written by [`PermutationSet::write_csv`]; the
    /// imputation log is left empty.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self, SamplerError> {
        let path = path.as_ref();
        let err = |msg: String| SamplerError::Io(format!("{}: {msg}", path.display()));
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| err(e.to_string()))?;
        let m = reader.headers().map_err(|e| err(e.to_string()))?.len();
        let mut columns = vec![Vec::new(); m];
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(|e| err(e.to_string()))?;
            for (j, cell) in record.iter().enumerate() {
                let cell = cell.trim();
                let v = if cell.is_empty() {
                    None
                } else {
                    Some(cell.parse::<usize>().map_err(|_| err(format!("row {row}: bad entry {cell:?}")))?)
                };
                columns[j].push(v);
            }
        }
        let n_a = columns.first().map_or(0, Vec::len);
        Ok(PermutationSet {
            n_a,
            columns,
            imputations: Vec::new(),
        })
    }

    /// Reads an imputation log into this set.
    pub fn read_imputations(&mut self, path: impl AsRef<Path>) -> Result<(), SamplerError> {
        let path = path.as_ref();
        let err = |msg: String| SamplerError::Io(format!("{}: {msg}", path.display()));
        let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
        self.imputations.clear();
        for record in reader.records() {
            let r = record.map_err(|e| err(e.to_string()))?;
            let field = |i: usize| -> Result<u64, SamplerError> {
                r.get(i)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| err(format!("bad imputation record {:?}", r)))
            };
            self.imputations.push(ImputedLink {
                sample: field(0)? as usize,
                block: field(1)?,
                a_row: field(2)? as usize,
                b_row: field(3)? as usize,
            });
        }
        Ok(())
    }
}
