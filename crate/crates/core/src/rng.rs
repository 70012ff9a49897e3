//! Deterministic random streams.
//!
//! Every unit of independent work (one block in one iteration, one model in
//! one iteration, one baseline column of one block) draws from its own
//! ChaCha stream keyed by the run seed, so results do not depend on how the
//! work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamKind {
    Block = 0,
    Model = 1,
    Baseline = 2,
    Harness = 3,
}

/// Generator behind every stream.
pub type SeededRng = ChaCha8Rng;

const INDEX_BITS: u32 = 30;

/// Stream for work item `index` of `kind` at step `step`. `index` must fit
/// in 30 bits and `step` in 32.
pub fn stream(seed: u64, kind: StreamKind, index: usize, step: u64) -> SeededRng {
    assert!(index < (1 << INDEX_BITS), "stream index {index} out of range");
    assert!(step <= u64::from(u32::MAX), "stream step {step} out of range");
    let id = (step << 32) | ((kind as u64) << INDEX_BITS) | index as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
