//! Short-time spectral analysis and synthesis.
//!
//! Analysis is centered: the waveform is reflect-padded by half a transform
//! length on both ends, and frame `t` starts at `t * hop` in the padded
//! signal, giving `1 + len / hop` frames. Synthesis is weighted overlap-add
//! normalized by the summed squared window, so any window/hop pair with
//! full overlap coverage reconstructs the interior exactly.

use crate::dsp::fft;
use crate::error::{Error, Result};

/// Analysis window family. All windows are periodic (denominator `N`, not
/// `N - 1`) so overlap-add sums stay flat.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Window {
    Blackman,
    Hann,
    Rect,
}

impl Window {
    pub fn sample(self, j: usize, n: usize) -> f64 {
        let x = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
        match self {
            Window::Blackman => 0.42 - 0.5 * x.cos() + 0.08 * (2.0 * x).cos(),
            Window::Hann => 0.5 - 0.5 * x.cos(),
            Window::Rect => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Window::Blackman => "blackman",
            Window::Hann => "hann",
            Window::Rect => "rect",
        }
    }

    pub fn parse(s: &str) -> Result<Window> {
        match s {
            "blackman" => Ok(Window::Blackman),
            "hann" => Ok(Window::Hann),
            "rect" => Ok(Window::Rect),
            other => Err(Error::InvalidArgument(format!(
                "unknown window {other:?} (expected blackman, hann, or rect)"
            ))),
        }
    }
}

/// Transform length, hop, and window of one analysis chain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StftGeometry {
    pub n_fft: usize,
    pub hop: usize,
    pub window: Window,
}

impl StftGeometry {
    pub fn new(n_fft: usize, hop: usize, window: Window) -> Result<Self> {
        if n_fft < 2 || n_fft % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "transform length must be even and at least 2, got {n_fft}"
            )));
        }
        if hop == 0 || hop > n_fft {
            return Err(Error::InvalidArgument(format!(
                "hop must be in 1..={n_fft}, got {hop}"
            )));
        }
        Ok(StftGeometry { n_fft, hop, window })
    }

    /// One-sided bin count, `n_fft / 2 + 1`.
    pub fn bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Frame count for a waveform of `len` samples under centered analysis.
    pub fn frames_for(&self, len: usize) -> usize {
        1 + len / self.hop
    }

    pub fn window_samples(&self) -> Vec<f64> {
        (0..self.n_fft).map(|j| self.window.sample(j, self.n_fft)).collect()
    }
}

/// One-sided complex spectrogram in bin-major layout: plane index
/// `f * frames + t`.
#[derive(Clone, Debug)]
pub struct Spectrogram {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub bins: usize,
    pub frames: usize,
}

impl Spectrogram {
    pub fn magnitude(&self) -> Vec<f64> {
        self.re.iter().zip(&self.im).map(|(&r, &i)| r.hypot(i)).collect()
    }

    /// Per-cell unit phase as (cos, sin); cells with vanishing magnitude get
    /// phase (1, 0).
    pub fn phase(&self) -> (Vec<f64>, Vec<f64>) {
        let mut cos = Vec::with_capacity(self.re.len());
        let mut sin = Vec::with_capacity(self.re.len());
        for (&r, &i) in self.re.iter().zip(&self.im) {
            let m = r.hypot(i);
            if m < 1e-300 {
                cos.push(1.0);
                sin.push(0.0);
            } else {
                cos.push(r / m);
                sin.push(i / m);
            }
        }
        (cos, sin)
    }
}

/// Centered short-time analysis. The waveform must be at least one hop long.
pub fn stft(x: &[f64], geom: &StftGeometry) -> Result<Spectrogram> {
    if x.len() < geom.hop {
        return Err(Error::InvalidArgument(format!(
            "waveform of {} samples is shorter than one hop ({})",
            x.len(),
            geom.hop
        )));
    }
    let (re, im, frames) = fft::stft_planes(x, geom);
    Ok(Spectrogram { re, im, bins: geom.bins(), frames })
}

/// Weighted overlap-add synthesis back to `out_len` samples. The frame count
/// must match what centered analysis of `out_len` samples would produce.
pub fn istft(spec: &Spectrogram, geom: &StftGeometry, out_len: usize) -> Result<Vec<f64>> {
    if spec.bins != geom.bins() {
        return Err(Error::Shape(format!(
            "spectrogram has {} bins, geometry wants {}",
            spec.bins,
            geom.bins()
        )));
    }
    if spec.frames != geom.frames_for(out_len) {
        return Err(Error::Shape(format!(
            "{} frames cannot synthesize {out_len} samples at hop {}",
            spec.frames, geom.hop
        )));
    }
    fft::istft_core(&spec.re, &spec.im, spec.frames, geom, out_len)
}
