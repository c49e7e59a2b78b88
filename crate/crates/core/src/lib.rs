pub mod enrichment;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod harness;
pub mod model;
pub mod numerics;
pub mod seed;

pub use error::{Error, Result};
