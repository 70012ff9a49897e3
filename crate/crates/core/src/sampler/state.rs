use rand::Rng;

use crate::data::{BlockId, BlockIndex, BlockRows};
use crate::rng::{stream, StreamKind};

/// A file-A position within a block. Imputed slots duplicate an observed
/// row of the same block so that every file-B record has a partner.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Slot {
    pub a_row: usize,
    pub imputed: bool,
}

/// Linkage of one block: `assignment[s]` is the file-B row linked to slot
/// `s`, or `None` when the slot is unmatched.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockState {
    pub id: BlockId,
    pub rows_a: Vec<usize>,
    pub rows_b: Vec<usize>,
    pub slots: Vec<Slot>,
    pub assignment: Vec<Option<usize>>,
}

impl BlockState {
    /// Links slots to file-B rows in file order. Extra slots needed when file
    /// B is larger are filled by uniform draws from the block's A rows.
    pub fn initial<R: Rng + ?Sized>(id: BlockId, rows: &BlockRows, rng: &mut R) -> Self {
        assert!(!rows.is_degenerate(), "block {id} has an empty side");
        let len = rows.slots();
        let mut slots: Vec<Slot> = rows
            .rows_a
            .iter()
            .map(|&a_row| Slot {
                a_row,
                imputed: false,
            })
            .collect();
        while slots.len() < len {
            let a_row = rows.rows_a[rng.random_range(0..rows.rows_a.len())];
            slots.push(Slot {
                a_row,
                imputed: true,
            });
        }
        let assignment = (0..len).map(|s| rows.rows_b.get(s).copied()).collect();
        BlockState {
            id,
            rows_a: rows.rows_a.clone(),
            rows_b: rows.rows_b.clone(),
            slots,
            assignment,
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn imputed_count(&self) -> usize {
        self.slots.iter().filter(|s| s.imputed).count()
    }

    /// Redraws the file-A row behind each imputed slot uniformly with
    /// replacement from the block's observed A rows. Links are kept.
    pub fn repad<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let n = self.rows_a.len();
        for slot in self.slots.iter_mut().filter(|s| s.imputed) {
            slot.a_row = self.rows_a[rng.random_range(0..n)];
        }
    }

    /// `(a_row, b_row)` of every matched slot, in slot order.
    pub fn matched_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.slots
            .iter()
            .zip(&self.assignment)
            .filter_map(|(s, b)| b.map(|b| (s.a_row, b)))
    }

    /// Checks the block's structural invariants.
    pub fn check(&self) -> Result<(), String> {
        let (ia, ib) = (self.rows_a.len(), self.rows_b.len());
        let len = ia.max(ib);
        if self.slots.len() != len || self.assignment.len() != len {
            return Err(format!("block {}: {} slots, expected {len}", self.id, self.slots.len()));
        }
        let imputed = self.imputed_count();
        if imputed != ib.saturating_sub(ia) {
            return Err(format!("block {}: {imputed} imputed slots", self.id));
        }
        for s in &self.slots {
            if !self.rows_a.contains(&s.a_row) {
                return Err(format!("block {}: slot row {} not in block", self.id, s.a_row));
            }
        }
        let observed: Vec<usize> = self.slots.iter().filter(|s| !s.imputed).map(|s| s.a_row).collect();
        let mut sorted = observed.clone();
        sorted.sort_unstable();
        let mut expected = self.rows_a.clone();
        expected.sort_unstable();
        if sorted != expected {
            return Err(format!("block {}: observed slots are not the block's A rows", self.id));
        }
        let mut matched: Vec<usize> = self.assignment.iter().flatten().copied().collect();
        matched.sort_unstable();
        let mut rows_b = self.rows_b.clone();
        rows_b.sort_unstable();
        if matched != rows_b {
            return Err(format!(
                "block {}: matched B rows are not a permutation of the block's B rows",
                self.id
            ));
        }
        Ok(())
    }
}

/// Linkage of every block that has records in both files.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinkageState {
    pub blocks: Vec<BlockState>,
}

impl LinkageState {
    /// Starting linkage in file order; block `k` (in ascending id order) pads
    /// from its own stream.
    pub fn initialize(index: &BlockIndex, seed: u64) -> Self {
        let blocks = index
            .linkable()
            .enumerate()
            .map(|(k, (id, rows))| {
                let mut rng = stream(seed, StreamKind::Block, k, 0);
                BlockState::initial(id, rows, &mut rng)
            })
            .collect();
        LinkageState { blocks }
    }

    pub fn matched_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.blocks.iter().flat_map(BlockState::matched_pairs)
    }

    pub fn check(&self) -> Result<(), String> {
        self.blocks.iter().try_for_each(BlockState::check)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rows(a: &[usize], b: &[usize]) -> BlockRows {
        BlockRows {
            rows_a: a.to_vec(),
            rows_b: b.to_vec(),
        }
    }

    #[test]
    fn balanced_block_in_file_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = BlockState::initial(1, &rows(&[10, 11], &[40, 41]), &mut rng);
        assert_eq!(s.assignment, vec![Some(40), Some(41)]);
        assert_eq!(s.imputed_count(), 0);
        s.check().unwrap();
    }

    #[test]
    fn larger_b_side_is_padded() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = BlockState::initial(1, &rows(&[10], &[40, 41]), &mut rng);
        assert_eq!(
            s.slots,
            vec![
                Slot { a_row: 10, imputed: false },
                Slot { a_row: 10, imputed: true }
            ]
        );
        assert_eq!(s.assignment, vec![Some(40), Some(41)]);
        s.check().unwrap();
    }

    #[test]
    fn larger_a_side_leaves_unmatched() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = BlockState::initial(1, &rows(&[10, 11, 12], &[40]), &mut rng);
        assert_eq!(s.assignment, vec![Some(40), None, None]);
        assert_eq!(s.matched_pairs().collect::<Vec<_>>(), vec![(10, 40)]);
        s.check().unwrap();
    }

    #[test]
    fn repad_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = BlockState::initial(1, &rows(&[10, 11], &[40, 41, 42]), &mut rng);
        let before = s.assignment.clone();
        let draws = 10_000;
        let mut tens = 0;
        for _ in 0..draws {
            s.repad(&mut rng);
            if s.slots[2].a_row == 10 {
                tens += 1;
            }
        }
        assert_eq!(s.assignment, before);
        let freq = tens as f64 / draws as f64;
        assert!((freq - 0.5).abs() < 0.02, "{freq}");
    }

    #[test]
    fn repad_no_op_and_forced_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = BlockState::initial(1, &rows(&[10, 11], &[40, 41]), &mut rng);
        let before = s.clone();
        s.repad(&mut rng);
        assert_eq!(s, before);

        let mut s = BlockState::initial(2, &rows(&[10], &[40, 41, 42, 43]), &mut rng);
        s.repad(&mut rng);
        assert_eq!(s.imputed_count(), 3);
        assert!(s.slots.iter().all(|sl| sl.a_row == 10));
    }

    #[test]
    fn initialize_skips_degenerate_blocks() {
        let idx = BlockIndex::from_ids(&[1, 1, 2, 3], &[1, 1, 2, 4]);
        let st = LinkageState::initialize(&idx, 1);
        assert_eq!(st.blocks.iter().map(|b| b.id).collect::<Vec<_>>(), vec![1, 2]);
        st.check().unwrap();
    }
}
