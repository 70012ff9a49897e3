//! Bayesian record linkage of two files that share no identifiers.
//!
//! Records are linked only within blocks. A chain of GLMs relates file-B
//! variables to file-A variables, and a Gibbs sampler alternates between the
//! GLM parameters and the block permutations. The exported permutations are
//! treated as multiple imputations of the unknown linkage.

pub mod data;
pub mod formula;
pub mod glm;
pub mod harness;
pub mod linkage;
pub mod mi;
pub mod rng;
pub mod sampler;

use thiserror::Error;

/// Any error raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error(transparent)]
    Chain(#[from] formula::ChainError),
    #[error(transparent)]
    Glm(#[from] glm::GlmError),
    #[error(transparent)]
    Sampler(#[from] sampler::SamplerError),
    #[error(transparent)]
    Mi(#[from] mi::MiError),
    #[error(transparent)]
    Linkage(#[from] linkage::LinkageError),
}
