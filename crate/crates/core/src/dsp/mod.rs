//! Signal processing: short-time analysis/synthesis, exact-ratio noise
//! mixing, PCM wav I/O, and spectral feature extraction.

pub(crate) mod fft;
pub mod features;
pub mod mix;
pub mod stft;
pub mod wav;

pub use stft::{istft, stft, Spectrogram, StftGeometry, Window};
