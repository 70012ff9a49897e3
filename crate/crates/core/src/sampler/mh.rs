use rand::Rng;

use super::{swap_log_ratio, BlockState, PairScorer};

/// Proposal and acceptance counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SwapStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl std::ops::Add for SwapStats {
    type Output = SwapStats;

    fn add(self, o: SwapStats) -> SwapStats {
        SwapStats {
            proposed: self.proposed + o.proposed,
            accepted: self.accepted + o.accepted,
        }
    }
}

/// One Metropolis-Hastings swap proposal. Both slots are drawn uniformly and
/// independently; drawing the same slot twice proposes the current state.
/// Returns whether the proposal was accepted.
pub fn mh_propose<R: Rng + ?Sized>(block: &mut BlockState, scorer: &PairScorer<'_>, rng: &mut R) -> bool {
    let len = block.len();
    let i1 = rng.random_range(0..len);
    let i2 = rng.random_range(0..len);
    let u: f64 = rng.random();
    let ratio = swap_log_ratio(block, i1, i2, scorer);
    if u.ln() < ratio {
        block.assignment.swap(i1, i2);
        true
    } else {
        false
    }
}

/// `multiplier × len` proposals on one block. Blocks with a single slot have
/// one permutation and are left alone.
pub fn mh_block_sweep<R: Rng + ?Sized>(
    block: &mut BlockState,
    scorer: &PairScorer<'_>,
    multiplier: usize,
    rng: &mut R,
) -> SwapStats {
    let len = block.len();
    if len < 2 {
        return SwapStats::default();
    }
    let proposed = multiplier * len;
    let accepted = (0..proposed).filter(|_| mh_propose(block, scorer, rng)).count();
    SwapStats {
        proposed: proposed as u64,
        accepted: accepted as u64,
    }
}
