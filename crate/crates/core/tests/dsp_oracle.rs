//! Cross-validation of the fast DSP/tensor kernels against the slow,
//! obviously-correct reference implementations.

use spoofdet_core::dsp::features::{log_magnitude_lowband, tile_frames, LOG_FLOOR};
use spoofdet_core::dsp::mix::{mix_at_snr, noise_segment};
use spoofdet_core::dsp::{istft, stft, StftGeometry, Window};
use spoofdet_core::tensor::{init, Graph, PoolMode, Tensor};
use spoofdet_oracles as oracle;

fn rand_vec(seed: u64, tag: &str, n: usize) -> Vec<f64> {
    init::uniform(&mut init::substream(seed, tag, 0), vec![n], 1.0).data().to_vec()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn analysis_matches_the_quadratic_time_transform() {
    for (seed, (n_fft, hop, win)) in [
        (1u64, (16usize, 4usize, Window::Hann)),
        (2, (32, 8, Window::Blackman)),
        (3, (16, 16, Window::Rect)),
        (4, (64, 16, Window::Blackman)),
    ] {
        let geom = StftGeometry::new(n_fft, hop, win).unwrap();
        let x = rand_vec(seed, "sig", 100 + 7 * seed as usize);
        let spec = stft(&x, &geom).unwrap();
        let w = geom.window_samples();
        let (ore, oim, oframes) = oracle::stft_naive(&x, n_fft, hop, &w);
        assert_eq!(spec.frames, oframes);
        assert!(max_abs_diff(&spec.re, &ore) < 1e-9, "re mismatch at {n_fft}/{hop}");
        assert!(max_abs_diff(&spec.im, &oim) < 1e-9, "im mismatch at {n_fft}/{hop}");
    }
}

#[test]
fn synthesis_matches_the_quadratic_time_inverse() {
    let geom = StftGeometry::new(32, 8, Window::Hann).unwrap();
    let x = rand_vec(11, "syn", 300);
    let spec = stft(&x, &geom).unwrap();
    let y = istft(&spec, &geom, x.len()).unwrap();
    let w = geom.window_samples();
    let oy = oracle::istft_naive(&spec.re, &spec.im, spec.frames, 32, 8, &w, x.len());
    assert!(max_abs_diff(&y, &oy) < 1e-9);
}

#[test]
fn round_trip_interior_error_stays_below_minus_50_db() {
    for (n_fft, hop, win, len) in [
        (320usize, 160usize, Window::Hann, 16000usize),
        (1728, 130, Window::Blackman, 8000),
        (64, 16, Window::Hann, 2000),
        (128, 32, Window::Blackman, 3000),
    ] {
        let geom = StftGeometry::new(n_fft, hop, win).unwrap();
        let x: Vec<f64> = rand_vec(n_fft as u64, "rt", len);
        let spec = stft(&x, &geom).unwrap();
        let y = istft(&spec, &geom, len).unwrap();
        let lo = n_fft.min(len / 4);
        let hi = len - lo;
        let sig: f64 = x[lo..hi].iter().map(|v| v * v).sum();
        let err: f64 = x[lo..hi].iter().zip(&y[lo..hi]).map(|(a, b)| (a - b) * (a - b)).sum();
        let db = 10.0 * (err / sig).log10();
        assert!(db < -50.0, "{n_fft}/{hop}: interior error {db:.1} dB");
    }
}

#[test]
fn windowed_frame_energy_survives_the_transform() {
    // One-sided Parseval: sum_f c_f |X_f|^2 == N * sum_j (w_j x_j)^2 with
    // c = 1 at the edges (0, N/2) and 2 in between.
    let n_fft = 32;
    let hop = 8;
    let geom = StftGeometry::new(n_fft, hop, Window::Hann).unwrap();
    let x = rand_vec(21, "parseval", 200);
    let spec = stft(&x, &geom).unwrap();
    let w = geom.window_samples();
    let pad = n_fft / 2;
    for t in 0..spec.frames {
        let mut freq = 0.0;
        for f in 0..spec.bins {
            let c = if f == 0 || f == n_fft / 2 { 1.0 } else { 2.0 };
            let i = f * spec.frames + t;
            freq += c * (spec.re[i] * spec.re[i] + spec.im[i] * spec.im[i]);
        }
        let mut time = 0.0;
        for j in 0..n_fft {
            let src = t * hop + j;
            let v = x[oracle::reflect_index(src as isize - pad as isize, x.len())] * w[j];
            time += v * v;
        }
        let rel = (freq - n_fft as f64 * time).abs() / (freq.abs() + 1e-12);
        assert!(rel < 1e-10, "frame {t}: {freq} vs {}", n_fft as f64 * time);
    }
}

#[test]
fn convolution_forward_matches_the_quadruple_loop() {
    for (seed, stride, pad) in
        [(0u64, (1, 1), (1, 1)), (1, (2, 1), (0, 1)), (2, (2, 2), (1, 0)), (3, (1, 2), (2, 2))]
    {
        let (ci, fi, ti) = (3, 6, 7);
        let (co, kf, kt) = (4, 3, 3);
        let input = rand_vec(seed, "ci", ci * fi * ti);
        let kernel = rand_vec(seed, "ck", co * ci * kf * kt);
        let bias = rand_vec(seed, "cb", co);
        let mut g = Graph::new();
        let i = g.constant(Tensor::new(vec![ci, fi, ti], input.clone()).unwrap());
        let k = g.constant(Tensor::new(vec![co, ci, kf, kt], kernel.clone()).unwrap());
        let b = g.constant(Tensor::new(vec![co], bias.clone()).unwrap());
        let y = g.conv2d(i, k, Some(b), stride, pad).unwrap();
        let want = oracle::conv2d_naive(
            &input,
            (ci, fi, ti),
            &kernel,
            (co, kf, kt),
            Some(&bias),
            stride,
            pad,
        );
        assert!(max_abs_diff(g.value(y).data(), &want) < 1e-12);
    }
}

#[test]
fn transposed_convolution_forward_matches_the_scatter_loop() {
    for (seed, stride, pad) in [(0u64, (2, 1), (1, 1)), (1, (2, 2), (0, 0)), (2, (1, 1), (1, 0))] {
        let (ci, fi, ti) = (3, 4, 5);
        let (co, kf, kt) = (2, 3, 3);
        let input = rand_vec(seed, "ti", ci * fi * ti);
        let kernel = rand_vec(seed, "tk", ci * co * kf * kt);
        let bias = rand_vec(seed, "tb", co);
        let mut g = Graph::new();
        let i = g.constant(Tensor::new(vec![ci, fi, ti], input.clone()).unwrap());
        let k = g.constant(Tensor::new(vec![ci, co, kf, kt], kernel.clone()).unwrap());
        let b = g.constant(Tensor::new(vec![co], bias.clone()).unwrap());
        let y = g.conv_transpose2d(i, k, Some(b), stride, pad).unwrap();
        let want = oracle::conv_transpose2d_naive(
            &input,
            (ci, fi, ti),
            &kernel,
            (co, kf, kt),
            Some(&bias),
            stride,
            pad,
        );
        assert_eq!(g.value(y).numel(), want.len());
        assert!(max_abs_diff(g.value(y).data(), &want) < 1e-12);
    }
}

#[test]
fn pooling_matches_the_direct_loop() {
    let (c, fi, ti) = (3, 6, 8);
    let input = rand_vec(5, "pool", c * fi * ti);
    for (window, stride) in [((2, 2), (2, 2)), ((3, 2), (1, 2)), ((2, 3), (2, 1))] {
        let mut g = Graph::new();
        let i = g.constant(Tensor::new(vec![c, fi, ti], input.clone()).unwrap());
        let mx = g.pool2d(i, PoolMode::Max, window, stride).unwrap();
        let av = g.pool2d(i, PoolMode::Avg, window, stride).unwrap();
        let omx = oracle::pool2d_naive(&input, (c, fi, ti), oracle::PoolKind::Max, window, stride);
        let oav = oracle::pool2d_naive(&input, (c, fi, ti), oracle::PoolKind::Avg, window, stride);
        assert!(max_abs_diff(g.value(mx).data(), &omx) < 1e-12);
        assert!(max_abs_diff(g.value(av).data(), &oav) < 1e-12);
    }
}

#[test]
fn matmul_matches_the_triple_loop() {
    let (m, k, n) = (4, 6, 3);
    let a = rand_vec(9, "ma", m * k);
    let b = rand_vec(9, "mb", k * n);
    let mut g = Graph::new();
    let ia = g.constant(Tensor::new(vec![m, k], a.clone()).unwrap());
    let ib = g.constant(Tensor::new(vec![k, n], b.clone()).unwrap());
    let y = g.matmul(ia, ib).unwrap();
    let mut want = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            for l in 0..k {
                want[i * n + j] += a[i * k + l] * b[l * n + j];
            }
        }
    }
    assert!(max_abs_diff(g.value(y).data(), &want) < 1e-12);
}

#[test]
fn mixing_hits_the_requested_ratio_under_the_reference_meter() {
    let clean: Vec<f64> = (0..5000).map(|i| (0.11 * i as f64).sin() * 0.3).collect();
    let noise: Vec<f64> = rand_vec(31, "noise", 1700);
    for snr in [-10.0, -5.0, 0.0, 5.0, 10.0, 20.0] {
        for offset in [0usize, 900, 1699] {
            let (mixed, gain) = mix_at_snr(&clean, &noise, snr, offset).unwrap();
            let added: Vec<f64> = mixed.iter().zip(&clean).map(|(m, c)| m - c).collect();
            let got = oracle::measured_snr_db(&clean, &added);
            assert!((got - snr).abs() < 1e-6, "snr {snr} offset {offset}: measured {got}");
            // The added noise is exactly the gain-scaled wrapped segment.
            let seg = noise_segment(&noise, offset, clean.len()).unwrap();
            let exact: Vec<f64> = seg.iter().map(|v| v * gain).collect();
            assert!(max_abs_diff(&added, &exact) < 1e-12);
        }
    }
}

#[test]
fn lowband_log_features_match_manual_construction() {
    let geom = StftGeometry::new(32, 8, Window::Blackman).unwrap();
    let x = rand_vec(41, "feat", 400);
    let spec = stft(&x, &geom).unwrap();
    let low = 9; // 32/4 + 1 keeps the bottom quarter of the band
    let feat = log_magnitude_lowband(&spec, low).unwrap();
    let w = geom.window_samples();
    let (ore, oim, frames) = oracle::stft_naive(&x, 32, 8, &w);
    for f in 0..low {
        for t in 0..frames {
            let m = ore[f * frames + t].hypot(oim[f * frames + t]);
            let want = m.max(LOG_FLOOR).ln();
            let got = feat.data()[f * frames + t];
            assert!((got - want).abs() < 1e-9);
        }
    }
}

#[test]
fn frame_tiling_matches_the_reference() {
    for (bins, frames, target) in [(3, 5, 12), (4, 6, 6), (2, 9, 4)] {
        let grid = rand_vec(frames as u64, "tile", bins * frames);
        let t = Tensor::new(vec![bins, frames], grid.clone()).unwrap();
        let tiled = tile_frames(&t, target).unwrap();
        let want = oracle::tile_frames_naive(&grid, bins, frames, target);
        assert_eq!(tiled.data(), &want[..]);
    }
}
