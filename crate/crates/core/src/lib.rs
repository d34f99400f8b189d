//! Claim verification, verifier-driven preference mining and DPO numerics.

pub mod claims;
pub mod corpus;
pub mod dpo;
pub mod error;
pub mod eval;
pub mod lexicon;
pub mod mining;
pub mod retrieval;
pub mod seed;
pub mod synth;
pub mod text;
pub mod verifier;

pub use error::{Error, Result};
