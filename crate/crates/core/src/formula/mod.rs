//! Model formulas and the ordered chain of conditional GLMs.
//!
//! Each model in a chain explains one file-B column from file-A columns and
//! from responses of models earlier in the chain, so the product of the
//! chain's densities is a proper conditional density of the file-B columns
//! given the file-A columns.

mod chain;
mod parse;

pub use chain::{build_chain, ChainError, Family, ModelChain, ModelSpec, Predictor, Source};
pub use parse::{parse_formula, Formula, ParseError, ParseErrorKind};
