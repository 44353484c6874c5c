//! Building blocks for line-level handwritten text recognition.
//!
//! The crate covers the whole recognition stack at a scale that runs on a
//! desktop CPU:
//!
//! * [`numkit`]: dense matrices, stable softmax and a finite-difference
//!   gradient checker.
//! * [`attention`]: a temporal attention block that re-weights every feature
//!   channel with a softmax over timesteps.
//! * [`ctcloss`]: CTC loss and its gradient, plus an enumeration oracle.
//! * [`decode`]: best-path, prefix beam search and lexicon-constrained word
//!   beam search over CTC output.
//! * [`lexicon`]: charsets, prefix trees and a smoothed word bigram model.
//! * [`metrics`]: Levenshtein alignment and CER / WER.
//! * [`model`]: a small recognizer (projection, attention, GRU, output layer)
//!   and its trainer.
//! * [`preprocess`]: illumination compensation, Sauvola binarization,
//!   deslanting and augmentation over 8-bit grayscale images.
//! * [`synthdata`]: a deterministic text-line renderer with a built-in
//!   bitmap font.
//!
//! The crate is `no_std` and only needs `alloc`. File formats and the
//! command line live in the companion `htr` crate.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod attention;
pub mod ctcloss;
pub mod decode;
pub mod lexicon;
pub mod metrics;
pub mod model;
pub mod numkit;
pub mod preprocess;
pub mod synthdata;

pub use error::{Error, Result};
