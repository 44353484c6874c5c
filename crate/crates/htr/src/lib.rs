//! File formats and command-line front end for `htr-core`: PGM images,
//! CTCMAT probability matrices, dataset manifests, model checkpoints and
//! loss-curve CSV files.

pub mod checkpoint;
pub mod cli;
pub mod ctcmat;
pub mod dataset;
mod error;
pub mod history;
pub mod pgm;

pub use error::{Error, Result};
pub use htr_core as core;
