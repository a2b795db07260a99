//! Encoder-decoder semantic role labeling.
//!
//! The crate turns SRL into sequence transduction: a source sentence with one
//! marked predicate is encoded by a stacked bidirectional LSTM and decoded into
//! a linearized stream of words and bracket symbols (`(#` opens an argument,
//! `A0)` closes it with its role). A copy mechanism lets the decoder reproduce
//! source words verbatim, and translation tokens plus language-indicator
//! embeddings let one model label, translate, or translate-and-label.

pub mod data;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod pipeline;
pub mod synthetic;
pub mod train;
pub mod vocab;

pub use error::{Error, Result};
