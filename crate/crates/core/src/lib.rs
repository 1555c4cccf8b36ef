//! Noise-robust synthetic-speech detection, built from first principles.
//!
//! The crate trains a two-branch system: a speech-enhancement branch that
//! denoises a magnitude spectrogram, and a classification branch that
//! decides bona fide vs. synthetic from log-magnitude features. The branches
//! are bridged by an interactive fusion block, and a student trained on
//! noisy audio distills knowledge online from a teacher trained in parallel
//! on the clean version of the same utterances. Everything — reverse-mode
//! autodiff, FFTs wired into the graph, optimizers, scoring — lives in this
//! workspace with no deep-learning dependencies.
//!
//! Layering, bottom to top:
//! - [`tensor`]: tapes, kernels, optimizer, init, checkpoints
//! - [`dsp`]: short-time analysis/synthesis, mixing, wav I/O, features
//! - [`models`]: enhancer, fusion, classifier
//! - [`data`]: manifests, toy corpus generation, noisy-view construction
//! - [`train`]: variant wiring, loss assembly, the epoch loop
//! - [`metrics`]: equal-error-rate scoring and breakdown reports
//! - [`config`]: experiment configuration files

pub mod config;
pub mod data;
pub mod dsp;
pub mod error;
pub mod metrics;
pub mod models;
pub(crate) mod par;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
