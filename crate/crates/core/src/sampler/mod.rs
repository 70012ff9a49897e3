//! Joint sampling of block-wise linkages and model parameters.
//!
//! Within a block of `I_A` file-A and `I_B` file-B records the linkage is a
//! permutation over `max(I_A, I_B)` slots. When file B is larger the extra
//! slots are imputed copies of the block's A rows, redrawn every iteration;
//! when file A is larger the extra A rows stay unmatched.

mod mh;
mod output;
mod run;
mod score;
mod state;

pub use mh::{mh_block_sweep, mh_propose, SwapStats};
pub use output::{ImputedLink, PermutationSet};
pub use run::{run, RunSummary, SampleOutput, SamplerConfig, SINGULAR_PATIENCE};
pub use score::{swap_log_ratio, LinkModel, PairScorer};
pub use state::{BlockState, LinkageState, Slot};

use thiserror::Error;

use crate::glm::GlmError;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("no block has records in both files")]
    NoLinkableBlocks,
    #[error("model {model} ({response}) has a rank-deficient design at iteration {iteration}")]
    RankDeficient {
        model: usize,
        response: String,
        iteration: usize,
    },
    #[error("model {model}: {source}")]
    Glm {
        model: usize,
        #[source]
        source: GlmError,
    },
    #[error("sample {sample}: {message}")]
    InvalidPermutation { sample: usize, message: String },
    #[error("{0}")]
    Io(String),
}
