//! Spectral features for the classifier branch: clamped log-magnitude over
//! the low-frequency band, tiled or truncated to a fixed frame count.

use crate::dsp::Spectrogram;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Numerical floor applied before the logarithm so silence stays finite.
pub const LOG_FLOOR: f64 = 1e-8;

/// ln(max(m, floor)) over the first `low_bins` bins -> `[low_bins, frames]`.
pub fn log_magnitude_lowband(spec: &Spectrogram, low_bins: usize) -> Result<Tensor> {
    if low_bins == 0 || low_bins > spec.bins {
        return Err(Error::Shape(format!(
            "low band of {low_bins} bins out of range for {} total",
            spec.bins
        )));
    }
    let frames = spec.frames;
    let mut data = Vec::with_capacity(low_bins * frames);
    for f in 0..low_bins {
        for t in 0..frames {
            let i = f * frames + t;
            let m = spec.re[i].hypot(spec.im[i]);
            data.push(m.max(LOG_FLOOR).ln());
        }
    }
    Tensor::new(vec![low_bins, frames], data)
}

/// Repeat a `[bins, frames]` grid along time until `target` frames, cutting
/// the last repetition short; a longer grid is truncated.
pub fn tile_frames(grid: &Tensor, target: usize) -> Result<Tensor> {
    let s = grid.shape();
    if s.len() != 2 {
        return Err(Error::Shape(format!("tile_frames expects [bins, frames], got {s:?}")));
    }
    if target == 0 {
        return Err(Error::InvalidArgument("target frame count must be positive".into()));
    }
    let (bins, frames) = (s[0], s[1]);
    let mut data = Vec::with_capacity(bins * target);
    for f in 0..bins {
        let row = &grid.data()[f * frames..(f + 1) * frames];
        for t in 0..target {
            data.push(row[t % frames]);
        }
    }
    Tensor::new(vec![bins, target], data)
}
