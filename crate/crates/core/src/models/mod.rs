//! Trainable model components: the denoising enhancer, the interactive
//! fusion block, and the spoofing classifier.

pub mod classifier;
pub mod enhancer;
pub mod fusion;
pub mod params;

pub use params::ParamSet;
