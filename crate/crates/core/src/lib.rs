//! Planning and executing exact tensor-network contractions with the
//! randomized sphere-separator hierarchy: per-instance rigorous
//! operation-count ledgers, the closed-form analytic bounds, and verified
//! contraction values on small instances.

pub mod circuit;
pub mod bench;
pub mod error;
pub mod generators;
pub mod geometry;
pub mod separator;
pub mod tncore;

pub use error::{Error, Result};
