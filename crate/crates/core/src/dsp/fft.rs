//! FFT-backed analysis/synthesis kernels and their exact adjoints.
//!
//! The analysis operator maps a waveform to one-sided re/im planes; its
//! adjoint zero-pads the one-sided gradient back to a full spectrum, runs an
//! unnormalized inverse transform, windows, and folds overlapping frames
//! (including the reflection pad) back onto the waveform. The fixed-phase
//! synthesis operator is linear in the magnitude grid, and its adjoint
//! re-projects a waveform gradient onto each frame's phase rays. Both
//! adjoints are validated against central differences in the test suite.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::dsp::StftGeometry;
use crate::error::{Error, Result};

/// Mirror an out-of-range index back into `[0, n)` without repeating edge
/// samples (period `2(n-1)` bounce).
fn reflect_index(i: i64, n: i64) -> usize {
    debug_assert!(n > 0);
    if n == 1 {
        return 0;
    }
    let p = 2 * (n - 1);
    let m = i.rem_euclid(p);
    if m < n {
        m as usize
    } else {
        (p - m) as usize
    }
}

pub(crate) fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    let n = x.len() as i64;
    (0..x.len() + 2 * pad).map(|i| x[reflect_index(i as i64 - pad as i64, n)]).collect()
}

/// Forward analysis: returns bin-major re/im planes (`f * frames + t`) and
/// the frame count.
pub(crate) fn stft_planes(x: &[f64], geom: &StftGeometry) -> (Vec<f64>, Vec<f64>, usize) {
    let n = geom.n_fft;
    let hop = geom.hop;
    let bins = geom.bins();
    let frames = geom.frames_for(x.len());
    let padded = reflect_pad(x, n / 2);
    let win = geom.window_samples();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut re = vec![0.0; bins * frames];
    let mut im = vec![0.0; bins * frames];
    for t in 0..frames {
        let off = t * hop;
        for j in 0..n {
            buf[j] = Complex::new(padded[off + j] * win[j], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for f in 0..bins {
            re[f * frames + t] = buf[f].re;
            im[f * frames + t] = buf[f].im;
        }
    }
    (re, im, frames)
}

/// Adjoint of [`stft_planes`] with respect to the waveform: gradient planes
/// in, waveform gradient out.
pub(crate) fn stft_adjoint(
    gre: &[f64],
    gim: &[f64],
    frames: usize,
    geom: &StftGeometry,
    xlen: usize,
) -> Vec<f64> {
    let n = geom.n_fft;
    let pad = n / 2;
    let hop = geom.hop;
    let bins = geom.bins();
    let win = geom.window_samples();
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(n);
    let mut scratch = vec![Complex::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let mut gpad = vec![0.0; xlen + 2 * pad];
    for t in 0..frames {
        // Adjoint of one-sided truncation is zero padding, not hermitian
        // mirroring: bins above the fold carry no gradient of their own.
        for b in buf.iter_mut() {
            *b = Complex::new(0.0, 0.0);
        }
        for f in 0..bins {
            buf[f] = Complex::new(gre[f * frames + t], gim[f * frames + t]);
        }
        ifft.process_with_scratch(&mut buf, &mut scratch);
        let off = t * hop;
        for j in 0..n {
            gpad[off + j] += buf[j].re * win[j];
        }
    }
    let mut gx = vec![0.0; xlen];
    for (i, &g) in gpad.iter().enumerate() {
        gx[reflect_index(i as i64 - pad as i64, xlen as i64)] += g;
    }
    gx
}

/// Weighted overlap-add synthesis from one-sided re/im planes. Each frame is
/// hermitian-extended, inverse-transformed (real part, `1/N` normalized),
/// windowed into an accumulator, and divided by the summed squared window.
/// Fails if any sample inside the output region has no window coverage.
pub(crate) fn istft_core(
    re: &[f64],
    im: &[f64],
    frames: usize,
    geom: &StftGeometry,
    out_len: usize,
) -> Result<Vec<f64>> {
    let n = geom.n_fft;
    let pad = n / 2;
    let hop = geom.hop;
    let win = geom.window_samples();
    let cover = (frames - 1) * hop + n;
    let plen = (out_len + 2 * pad).max(cover);
    let mut num = vec![0.0; plen];
    let mut den = vec![0.0; plen];
    let mut planner = FftPlanner::new();
    let ifft = planner.plan_fft_inverse(n);
    let mut scratch = vec![Complex::new(0.0, 0.0); ifft.get_inplace_scratch_len()];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let inv_n = 1.0 / n as f64;
    for t in 0..frames {
        buf[0] = Complex::new(re[t], im[t]);
        for f in 1..n / 2 {
            let v = Complex::new(re[f * frames + t], im[f * frames + t]);
            buf[f] = v;
            buf[n - f] = v.conj();
        }
        buf[n / 2] = Complex::new(re[(n / 2) * frames + t], im[(n / 2) * frames + t]);
        ifft.process_with_scratch(&mut buf, &mut scratch);
        let off = t * hop;
        for j in 0..n {
            num[off + j] += win[j] * buf[j].re * inv_n;
            den[off + j] += win[j] * win[j];
        }
    }
    let mut y = vec![0.0; out_len];
    for i in 0..out_len {
        let d = den[pad + i];
        if d < 1e-12 {
            return Err(Error::Numeric(format!(
                "overlap-add has no window coverage at sample {i}; window/hop pair cannot reconstruct"
            )));
        }
        y[i] = num[pad + i] / d;
    }
    Ok(y)
}

/// Synthesis from a magnitude grid under a fixed (cos, sin) phase grid.
pub(crate) fn istft_fixed_phase_forward(
    mag: &[f64],
    cos_p: &[f64],
    sin_p: &[f64],
    frames: usize,
    geom: &StftGeometry,
    out_len: usize,
) -> Result<Vec<f64>> {
    let re: Vec<f64> = mag.iter().zip(cos_p).map(|(&m, &c)| m * c).collect();
    let im: Vec<f64> = mag.iter().zip(sin_p).map(|(&m, &s)| m * s).collect();
    istft_core(&re, &im, frames, geom, out_len)
}

/// Adjoint of [`istft_fixed_phase_forward`] with respect to the magnitude
/// grid: project the waveform gradient back through overlap-add
/// normalization, window, forward transform, and each cell's phase ray. Bins
/// below the fold count twice (hermitian pairing), the edges once.
pub(crate) fn istft_fixed_phase_adjoint(
    gy: &[f64],
    cos_p: &[f64],
    sin_p: &[f64],
    frames: usize,
    geom: &StftGeometry,
    out_len: usize,
) -> Vec<f64> {
    let n = geom.n_fft;
    let pad = n / 2;
    let hop = geom.hop;
    let bins = geom.bins();
    let win = geom.window_samples();
    let cover = (frames - 1) * hop + n;
    let plen = (out_len + 2 * pad).max(cover);
    let mut den = vec![0.0; plen];
    for t in 0..frames {
        let off = t * hop;
        for j in 0..n {
            den[off + j] += win[j] * win[j];
        }
    }
    let mut gnum = vec![0.0; plen];
    for (i, &g) in gy.iter().enumerate().take(out_len) {
        gnum[pad + i] = g / den[pad + i];
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n);
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex::new(0.0, 0.0); n];
    let inv_n = 1.0 / n as f64;
    let mut gmag = vec![0.0; bins * frames];
    for t in 0..frames {
        let off = t * hop;
        for j in 0..n {
            buf[j] = Complex::new(win[j] * gnum[off + j], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for f in 0..bins {
            let c = if f == 0 || f == n / 2 { 1.0 } else { 2.0 };
            let idx = f * frames + t;
            gmag[idx] = c * inv_n * (cos_p[idx] * buf[f].re + sin_p[idx] * buf[f].im);
        }
    }
    gmag
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::Window;

    #[test]
    fn reflect_indexing_bounces_without_repeating_edges() {
        // n = 4: ... 2 1 | 0 1 2 3 | 2 1 0 1 ...
        assert_eq!(reflect_index(-1, 4), 1);
        assert_eq!(reflect_index(-2, 4), 2);
        assert_eq!(reflect_index(0, 4), 0);
        assert_eq!(reflect_index(3, 4), 3);
        assert_eq!(reflect_index(4, 4), 2);
        assert_eq!(reflect_index(5, 4), 1);
        assert_eq!(reflect_index(6, 4), 0);
        assert_eq!(reflect_index(7, 4), 1);
        assert_eq!(reflect_index(-100, 1), 0);
    }

    #[test]
    fn analysis_and_synthesis_invert_each_other() {
        let geom = StftGeometry::new(64, 16, Window::Hann).unwrap();
        let x: Vec<f64> =
            (0..400).map(|i| (0.3 * i as f64).sin() * 0.5 + (0.07 * i as f64).cos() * 0.2).collect();
        let (re, im, frames) = stft_planes(&x, &geom);
        let y = istft_core(&re, &im, frames, &geom, x.len()).unwrap();
        let err: f64 = x
            .iter()
            .zip(&y)
            .skip(64)
            .take(400 - 128)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(err < 1e-9, "interior reconstruction error {err}");
    }

    #[test]
    fn synthesis_with_true_phase_matches_plain_round_trip() {
        let geom = StftGeometry::new(32, 8, Window::Hann).unwrap();
        let x: Vec<f64> = (0..200).map(|i| ((i * 7 % 13) as f64 - 6.0) / 6.0).collect();
        let (re, im, frames) = stft_planes(&x, &geom);
        let mag: Vec<f64> = re.iter().zip(&im).map(|(&r, &i)| r.hypot(i)).collect();
        let (cos_p, sin_p): (Vec<f64>, Vec<f64>) = re
            .iter()
            .zip(&im)
            .map(|(&r, &i)| {
                let m = r.hypot(i);
                if m < 1e-300 {
                    (1.0, 0.0)
                } else {
                    (r / m, i / m)
                }
            })
            .unzip();
        let a = istft_core(&re, &im, frames, &geom, x.len()).unwrap();
        let b = istft_fixed_phase_forward(&mag, &cos_p, &sin_p, frames, &geom, x.len()).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
    }

    #[test]
    fn uncovered_overlap_is_reported_as_numeric_failure() {
        // Hop beyond half the transform leaves gaps between hann windows.
        let geom = StftGeometry::new(32, 32, Window::Hann).unwrap();
        let x = vec![0.5; 200];
        let (re, im, frames) = stft_planes(&x, &geom);
        assert!(matches!(
            istft_core(&re, &im, frames, &geom, x.len()),
            Err(Error::Numeric(_))
        ));
    }
}
