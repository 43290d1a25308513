//! Geometric subset-sum solvers over the hypercube.

pub mod bench;
pub mod dp;
pub mod error;
pub mod instance;
pub mod numerics;
pub mod oracle;
pub mod quantize;
pub mod slab;
pub mod sssp;

pub use error::{Error, Result};
