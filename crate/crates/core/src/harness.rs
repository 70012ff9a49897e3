//! Synthetic data with known links, random-linkage baselines, and link
//! scoring.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use thiserror::Error;

use crate::data::{BlockId, BlockIndex, Column, ColumnType, DataError, DataFile};
use crate::rng::{stream, StreamKind};
use crate::sampler::{BlockState, LinkageState, PermutationSet};

/// Largest block the synthesizer creates.
pub const MAX_BLOCK_SIZE: usize = 24;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("column {0} is requested for both files")]
    Overlap(String),
    #[error("drop fraction {0} must lie in [0, 1)")]
    BadFraction(f64),
    #[error("truth file {path}: {message}")]
    Truth { path: String, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Parameters of the synthetic population.
///
/// `X1, X2 ~ N(0, 1)` independently; `Y = intercept + slopes·(X1, X2) + ε`
/// with the noise variance chosen so that `Y` correlates with its mean at
/// `correlation`; `D ~ Bernoulli(logit⁻¹(d_intercept + d_slope·X1))`.
#[derive(Clone, Debug, PartialEq)]
pub struct GenerativeModel {
    pub intercept: f64,
    pub slopes: [f64; 2],
    pub correlation: f64,
    pub d_intercept: f64,
    pub d_slope: f64,
    /// Share of records placed in singleton blocks.
    pub singleton_fraction: f64,
}

impl Default for GenerativeModel {
    fn default() -> Self {
        GenerativeModel {
            intercept: 1.0,
            slopes: [2.0, 1.0],
            correlation: 0.8,
            d_intercept: -0.5,
            d_slope: 1.5,
            singleton_fraction: 1.0 / 3.0,
        }
    }
}

impl GenerativeModel {
    pub fn noise_sd(&self) -> f64 {
        let signal = self.slopes.iter().map(|b| b * b).sum::<f64>();
        if self.correlation >= 1.0 {
            0.0
        } else {
            (signal * (1.0 / (self.correlation * self.correlation) - 1.0)).sqrt()
        }
    }
}

/// Block sizes summing to `n`: singleton blocks for about
/// `singleton_fraction·n` records, the rest in blocks of size
/// `2 + Poisson(mean - 2)` capped at [`MAX_BLOCK_SIZE`].
pub fn block_sizes<R: Rng + ?Sized>(n: usize, mean: f64, singleton_fraction: f64, rng: &mut R) -> Vec<usize> {
    let singles = ((singleton_fraction.clamp(0.0, 1.0) * n as f64).round() as usize).min(n);
    let mut sizes = vec![1; singles];
    let mut left = n - singles;
    let extra = Poisson::new((mean - 2.0).max(1e-9)).expect("positive rate");
    let mut multi = Vec::new();
    while left > 0 {
        let s = (2 + extra.sample(rng) as usize).min(MAX_BLOCK_SIZE).min(left);
        multi.push(s);
        left -= s;
    }
    if multi.last() == Some(&1) {
        multi.pop();
        match multi.last_mut() {
            Some(prev) => *prev += 1,
            None => multi.push(1),
        }
    }
    sizes.extend(multi);
    sizes
}

/// Complete synthetic file with columns `X1, X2, Y, D, block`. Rows are
/// grouped by block; block ids count up from 1.
pub fn synthesize<R: Rng + ?Sized>(n: usize, block_size_mean: f64, model: &GenerativeModel, rng: &mut R) -> DataFile {
    assert!(n >= 1, "need at least one record");
    let sizes = block_sizes(n, block_size_mean, model.singleton_fraction, rng);
    let sd = model.noise_sd();
    let (mut x1, mut x2, mut y, mut d, mut block) = (vec![], vec![], vec![], vec![], vec![]);
    for (k, &size) in sizes.iter().enumerate() {
        for _ in 0..size {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            let e: f64 = rng.sample(StandardNormal);
            let mean = model.intercept + model.slopes[0] * a + model.slopes[1] * b;
            let p = 1.0 / (1.0 + (-(model.d_intercept + model.d_slope * a)).exp());
            x1.push(a);
            x2.push(b);
            y.push(mean + sd * e);
            d.push(f64::from(rng.random::<f64>() < p));
            block.push((k + 1) as f64);
        }
    }
    DataFile::new(
        "synthetic",
        vec![
            Column::complete("X1", ColumnType::Continuous, x1),
            Column::complete("X2", ColumnType::Continuous, x2),
            Column::complete("Y", ColumnType::Continuous, y),
            Column::complete("D", ColumnType::Binary, d),
            Column::complete("block", ColumnType::Identifier, block),
        ],
        "block",
    )
    .expect("synthetic columns are consistent")
}

/// True file-B row of every file-A row; `None` when the partner was dropped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruthMap {
    pub b_for_a: Vec<Option<usize>>,
}

impl TruthMap {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), HarnessError> {
        let path = path.as_ref();
        let err = |e: std::io::Error| HarnessError::Truth {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        let mut out = BufWriter::new(File::create(path).map_err(err)?);
        writeln!(out, "a_row,b_row").map_err(err)?;
        for (a, b) in self.b_for_a.iter().enumerate() {
            match b {
                Some(b) => writeln!(out, "{a},{b}"),
                None => writeln!(out, "{a},"),
            }
            .map_err(err)?;
        }
        out.flush().map_err(err)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let err = |message: String| HarnessError::Truth {
            path: path.display().to_string(),
            message,
        };
        let mut reader = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
        let mut b_for_a = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let r = record.map_err(|e| err(e.to_string()))?;
            let a: usize = r
                .get(0)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| err(format!("bad a_row in record {i}")))?;
            if a != i {
                return Err(err(format!("record {i} has a_row {a}; rows must be listed in order")));
            }
            let b = match r.get(1).map(str::trim) {
                None | Some("") => None,
                Some(s) => Some(s.parse().map_err(|_| err(format!("bad b_row in record {i}")))?),
            };
            b_for_a.push(b);
        }
        Ok(TruthMap { b_for_a })
    }
}

/// Which file loses records in an unbalanced split.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropSide {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitOptions {
    /// Share of each multi-record block's records removed from `side`.
    pub drop_fraction: f64,
    pub side: DropSide,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            drop_fraction: 0.0,
            side: DropSide::B,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Split {
    pub a: DataFile,
    pub b: DataFile,
    pub truth: TruthMap,
}

/// Splits a complete file into two files that share only the block column.
/// File A keeps the original row order; file B's rows are shuffled within
/// each block.
pub fn split_complete<R: Rng + ?Sized>(
    complete: &DataFile,
    a_cols: &[&str],
    b_cols: &[&str],
    options: SplitOptions,
    rng: &mut R,
) -> Result<Split, HarnessError> {
    let block_col = complete.block_column();
    for name in a_cols {
        if b_cols.contains(name) || *name == block_col {
            return Err(HarnessError::Overlap(name.to_string()));
        }
    }
    if let Some(name) = b_cols.iter().find(|n| **n == block_col) {
        return Err(HarnessError::Overlap(name.to_string()));
    }
    if !(0.0..1.0).contains(&options.drop_fraction) {
        return Err(HarnessError::BadFraction(options.drop_fraction));
    }

    let ids = complete.block_ids();
    let mut groups: BTreeMap<BlockId, Vec<usize>> = BTreeMap::new();
    for (row, &id) in ids.iter().enumerate() {
        groups.entry(id).or_default().push(row);
    }
    let mut dropped = HashSet::new();
    if options.drop_fraction > 0.0 {
        for rows in groups.values().filter(|r| r.len() > 1) {
            let k = (options.drop_fraction * rows.len() as f64).floor() as usize;
            dropped.extend(rows.choose_multiple(rng, k).copied());
        }
    }
    let keep_a: Vec<usize> = (0..complete.len())
        .filter(|r| options.side != DropSide::A || !dropped.contains(r))
        .collect();

    let mut b_order: Vec<usize> = (0..complete.len()).collect();
    for rows in groups.values() {
        let mut shuffled = rows.clone();
        shuffled.shuffle(rng);
        for (&pos, &row) in rows.iter().zip(&shuffled) {
            b_order[pos] = row;
        }
    }
    if options.side == DropSide::B {
        b_order.retain(|r| !dropped.contains(r));
    }
    let mut position = vec![None; complete.len()];
    for (k, &row) in b_order.iter().enumerate() {
        position[row] = Some(k);
    }

    let mut a_names: Vec<&str> = a_cols.to_vec();
    a_names.push(block_col);
    let mut b_names: Vec<&str> = b_cols.to_vec();
    b_names.push(block_col);
    let a = complete.select_columns(&a_names)?.select_rows(&keep_a)?.with_name("A");
    let b = complete.select_columns(&b_names)?.select_rows(&b_order)?.with_name("B");
    let truth = TruthMap {
        b_for_a: keep_a.iter().map(|&r| position[r]).collect(),
    };
    Ok(Split { a, b, truth })
}

/// `m` linkages drawn uniformly over each block's permutations, padding as
/// the sampler does. Block `k`'s draw for column `c` uses its own stream.
pub fn random_baseline(index: &BlockIndex, m: usize, seed: u64) -> PermutationSet {
    let mut set = PermutationSet::new(index.n_a());
    for c in 0..m {
        let blocks = index
            .linkable()
            .enumerate()
            .map(|(k, (id, rows))| {
                let mut rng = stream(seed, StreamKind::Baseline, k, c as u64);
                let mut block = BlockState::initial(id, rows, &mut rng);
                block.assignment.shuffle(&mut rng);
                block
            })
            .collect();
        set.push_state(&LinkageState { blocks });
    }
    set
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CorrectLinks {
    pub total: usize,
    pub excl_singletons: usize,
}

/// Number of file-A rows linked to their true partner, overall and outside
/// singleton blocks.
pub fn count_correct(column: &[Option<usize>], truth: &TruthMap, index: &BlockIndex) -> CorrectLinks {
    assert_eq!(column.len(), truth.b_for_a.len(), "permutation and truth lengths differ");
    let block_of_a = index.block_of_a();
    let mut out = CorrectLinks::default();
    for (a, (got, want)) in column.iter().zip(&truth.b_for_a).enumerate() {
        if got.is_some() && got == want {
            out.total += 1;
            let single = index.get(block_of_a[a]).is_some_and(|r| r.is_singleton());
            if !single {
                out.excl_singletons += 1;
            }
        }
    }
    out
}
