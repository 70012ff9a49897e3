use std::collections::BTreeMap;

use statrs::function::factorial::ln_factorial;

use super::DataFile;

pub type BlockId = u64;

/// Row indices of one block in each file, in file order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BlockRows {
    pub rows_a: Vec<usize>,
    pub rows_b: Vec<usize>,
}

impl BlockRows {
    pub fn count_a(&self) -> usize {
        self.rows_a.len()
    }

    pub fn count_b(&self) -> usize {
        self.rows_b.len()
    }

    /// One side is empty, so there is nothing to link.
    pub fn is_degenerate(&self) -> bool {
        self.rows_a.is_empty() || self.rows_b.is_empty()
    }

    /// Exactly one record on each side.
    pub fn is_singleton(&self) -> bool {
        self.rows_a.len() == 1 && self.rows_b.len() == 1
    }

    /// Slot count once the smaller side is padded: `max(I_A, I_B)`.
    pub fn slots(&self) -> usize {
        self.rows_a.len().max(self.rows_b.len())
    }
}

/// Per-block row sets for a pair of files.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BlockIndex {
    blocks: BTreeMap<BlockId, BlockRows>,
    n_a: usize,
    n_b: usize,
}

impl BlockIndex {
    /// Groups rows of both files by block id. Blocks present in only one
    /// file are kept and reported by [`BlockRows::is_degenerate`].
    pub fn build(a: &DataFile, b: &DataFile) -> Self {
        Self::from_ids(&a.block_ids(), &b.block_ids())
    }

    pub fn from_ids(ids_a: &[BlockId], ids_b: &[BlockId]) -> Self {
        let mut blocks: BTreeMap<BlockId, BlockRows> = BTreeMap::new();
        for (row, &id) in ids_a.iter().enumerate() {
            blocks.entry(id).or_default().rows_a.push(row);
        }
        for (row, &id) in ids_b.iter().enumerate() {
            blocks.entry(id).or_default().rows_b.push(row);
        }
        BlockIndex {
            blocks,
            n_a: ids_a.len(),
            n_b: ids_b.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn n_a(&self) -> usize {
        self.n_a
    }

    pub fn n_b(&self) -> usize {
        self.n_b
    }

    pub fn get(&self, id: BlockId) -> Option<&BlockRows> {
        self.blocks.get(&id)
    }

    /// All blocks in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (BlockId, &BlockRows)> {
        self.blocks.iter().map(|(&id, rows)| (id, rows))
    }

    /// Blocks with records on both sides, in ascending id order.
    pub fn linkable(&self) -> impl Iterator<Item = (BlockId, &BlockRows)> {
        self.iter().filter(|(_, r)| !r.is_degenerate())
    }

    pub fn degenerate_ids(&self) -> Vec<BlockId> {
        self.iter()
            .filter(|(_, r)| r.is_degenerate())
            .map(|(id, _)| id)
            .collect()
    }

    /// Block of every file-A row.
    pub fn block_of_a(&self) -> Vec<BlockId> {
        let mut out = vec![0; self.n_a];
        for (id, rows) in self.iter() {
            for &r in &rows.rows_a {
                out[r] = id;
            }
        }
        out
    }

    /// Block of every file-B row.
    pub fn block_of_b(&self) -> Vec<BlockId> {
        let mut out = vec![0; self.n_b];
        for (id, rows) in self.iter() {
            for &r in &rows.rows_b {
                out[r] = id;
            }
        }
        out
    }
}

/// Log of the number of admissible assignments in a block with `count_a`
/// and `count_b` records: `max! / |count_a - count_b|!`.
pub fn count_permutations(count_a: usize, count_b: usize) -> f64 {
    let hi = count_a.max(count_b) as u64;
    let gap = count_a.abs_diff(count_b) as u64;
    ln_factorial(hi) - ln_factorial(gap)
}
