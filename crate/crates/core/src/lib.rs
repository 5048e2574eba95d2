//! Learned chroma features for chord recognition.
//!
//! The crate covers the whole pipeline:
//!
//! - [`dsp`]: audio loading, STFT, the quarter-tone filterbank, log compression
//!   and super-frame stacking.
//! - [`annotations`]: `.lab` parsing, chord templates and the maj/min reduction.
//! - [`nn`]: dense networks, losses, ADAM, dropout, early stopping and the
//!   `DCX1` model format.
//! - [`features`]: deep chroma plus the folded baselines and classifier-side
//!   context stacking.
//! - [`extractor`]: training the deep chroma network on a corpus.
//! - [`classifier`]: frame-wise multinomial logistic regression.
//! - [`eval`]: WCSR, fold construction and cross-validation.
//! - [`saliency`]: guided backpropagation and its aggregations.
//! - [`synth`]: a deterministic synthetic chord corpus.
//! - [`render`] and [`report`]: PGM/PPM rendering and result tables.

pub mod annotations;
pub mod classifier;
pub mod corpus;
pub mod dsp;
mod error;
pub mod eval;
pub mod extractor;
pub mod features;
pub mod formats;
pub mod nn;
pub mod render;
pub mod report;
pub mod saliency;
pub mod synth;

pub use error::{Error, Result};

/// Frames per second of every time series in the pipeline.
pub const FPS: f64 = 10.0;
