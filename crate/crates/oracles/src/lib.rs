//! Slow, obviously-correct reference implementations used as test oracles.
//!
//! Everything in this crate is written as direct loops over plain `f64`
//! slices, with no shared code and no dependency on the production crate.
//! Tests compare the fast implementations against these, so these stay as
//! close to the textbook definitions as possible: O(N^2) DFTs, quadruple
//! convolution loops, threshold-enumeration EER, central finite differences.

// ── Finite differences ──────────────────────────────────────────────────────

/// Central-difference gradient of a scalar function at `x`.
///
/// For each coordinate i: (f(x + h e_i) - f(x - h e_i)) / (2 h).
pub fn central_difference<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let saved = probe[i];
        probe[i] = saved + h;
        let up = f(&probe);
        probe[i] = saved - h;
        let down = f(&probe);
        probe[i] = saved;
        grad[i] = (up - down) / (2.0 * h);
    }
    grad
}

/// Worst-case discrepancy between two gradient vectors, relative where the
/// gradients are meaningfully sized and absolute (scaled by `floor`) where
/// both are tiny: max_i |a_i - b_i| / max(|a_i| + |b_i|, floor).
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut worst = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let denom = (x.abs() + y.abs()).max(floor);
        worst = worst.max((x - y).abs() / denom);
    }
    worst
}

// ── Convolution and pooling ─────────────────────────────────────────────────

/// Output length of a convolution axis: floor((n + 2 pad - k) / stride) + 1.
pub fn conv_out_len(n: usize, k: usize, stride: usize, pad: usize) -> usize {
    (n + 2 * pad - k) / stride + 1
}

/// 2-D convolution (cross-correlation) by quadruple loop.
///
/// Input is `[ci, fi, ti]`, kernel `[co, ci, kf, kt]`, both row-major.
/// Returns the `[co, fo, to]` output; `bias` (one value per output channel)
/// is optional.
#[allow(clippy::too_many_arguments)]
pub fn conv2d_naive(
    input: &[f64],
    (ci, fi, ti): (usize, usize, usize),
    kernel: &[f64],
    (co, kf, kt): (usize, usize, usize),
    bias: Option<&[f64]>,
    stride: (usize, usize),
    pad: (usize, usize),
) -> Vec<f64> {
    assert_eq!(input.len(), ci * fi * ti);
    assert_eq!(kernel.len(), co * ci * kf * kt);
    let fo = conv_out_len(fi, kf, stride.0, pad.0);
    let to = conv_out_len(ti, kt, stride.1, pad.1);
    let mut out = vec![0.0; co * fo * to];
    for oc in 0..co {
        for of in 0..fo {
            for ot in 0..to {
                let mut acc = bias.map_or(0.0, |b| b[oc]);
                for ic in 0..ci {
                    for dkf in 0..kf {
                        for dkt in 0..kt {
                            let f = (of * stride.0 + dkf) as isize - pad.0 as isize;
                            let t = (ot * stride.1 + dkt) as isize - pad.1 as isize;
                            if f < 0 || t < 0 || f >= fi as isize || t >= ti as isize {
                                continue;
                            }
                            let iv = input[(ic * fi + f as usize) * ti + t as usize];
                            let kv = kernel[((oc * ci + ic) * kf + dkf) * kt + dkt];
                            acc += iv * kv;
                        }
                    }
                }
                out[(oc * fo + of) * to + ot] = acc;
            }
        }
    }
    out
}

/// Transposed 2-D convolution by scatter loop.
///
/// Input is `[ci, fi, ti]`, kernel `[ci, co, kf, kt]`; output has size
/// `(fi - 1) * stride - 2 pad + k` per axis.
#[allow(clippy::too_many_arguments)]
pub fn conv_transpose2d_naive(
    input: &[f64],
    (ci, fi, ti): (usize, usize, usize),
    kernel: &[f64],
    (co, kf, kt): (usize, usize, usize),
    bias: Option<&[f64]>,
    stride: (usize, usize),
    pad: (usize, usize),
) -> Vec<f64> {
    assert_eq!(input.len(), ci * fi * ti);
    assert_eq!(kernel.len(), ci * co * kf * kt);
    let fo = (fi - 1) * stride.0 + kf - 2 * pad.0;
    let to = (ti - 1) * stride.1 + kt - 2 * pad.1;
    let mut out = vec![0.0; co * fo * to];
    if let Some(b) = bias {
        for oc in 0..co {
            for v in &mut out[oc * fo * to..(oc + 1) * fo * to] {
                *v = b[oc];
            }
        }
    }
    for ic in 0..ci {
        for f in 0..fi {
            for t in 0..ti {
                let iv = input[(ic * fi + f) * ti + t];
                for oc in 0..co {
                    for dkf in 0..kf {
                        for dkt in 0..kt {
                            let of = (f * stride.0 + dkf) as isize - pad.0 as isize;
                            let ot = (t * stride.1 + dkt) as isize - pad.1 as isize;
                            if of < 0 || ot < 0 || of >= fo as isize || ot >= to as isize {
                                continue;
                            }
                            let kv = kernel[((ic * co + oc) * kf + dkf) * kt + dkt];
                            out[(oc * fo + of as usize) * to + ot as usize] += iv * kv;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Pooling mode for [`pool2d_naive`].
#[derive(Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Avg,
}

/// 2-D max/average pooling over non-padded windows.
pub fn pool2d_naive(
    input: &[f64],
    (c, fi, ti): (usize, usize, usize),
    kind: PoolKind,
    window: (usize, usize),
    stride: (usize, usize),
) -> Vec<f64> {
    assert_eq!(input.len(), c * fi * ti);
    let fo = (fi - window.0) / stride.0 + 1;
    let to = (ti - window.1) / stride.1 + 1;
    let mut out = vec![0.0; c * fo * to];
    for ch in 0..c {
        for of in 0..fo {
            for ot in 0..to {
                let mut best = f64::NEG_INFINITY;
                let mut sum = 0.0;
                for df in 0..window.0 {
                    for dt in 0..window.1 {
                        let v = input[(ch * fi + of * stride.0 + df) * ti + ot * stride.1 + dt];
                        best = best.max(v);
                        sum += v;
                    }
                }
                out[(ch * fo + of) * to + ot] = match kind {
                    PoolKind::Max => best,
                    PoolKind::Avg => sum / (window.0 * window.1) as f64,
                };
            }
        }
    }
    out
}

// ── Fourier analysis ────────────────────────────────────────────────────────

/// O(N^2) real-input DFT returning `N/2 + 1` bins:
/// X_f = sum_j x_j exp(-2 pi i f j / N).
pub fn rdft_naive(frame: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = frame.len();
    let bins = n / 2 + 1;
    let mut re = vec![0.0; bins];
    let mut im = vec![0.0; bins];
    for f in 0..bins {
        let mut acc_re = 0.0;
        let mut acc_im = 0.0;
        for (j, &x) in frame.iter().enumerate() {
            let w = -2.0 * std::f64::consts::PI * (f * j) as f64 / n as f64;
            acc_re += x * w.cos();
            acc_im += x * w.sin();
        }
        re[f] = acc_re;
        im[f] = acc_im;
    }
    (re, im)
}

/// O(N^2) inverse of [`rdft_naive`]: rebuilds the length-`n` real frame from
/// the half spectrum by hermitian extension.
pub fn irdft_naive(re: &[f64], im: &[f64], n: usize) -> Vec<f64> {
    let bins = n / 2 + 1;
    assert_eq!(re.len(), bins);
    assert_eq!(im.len(), bins);
    let mut full_re = vec![0.0; n];
    let mut full_im = vec![0.0; n];
    for f in 0..bins {
        full_re[f] = re[f];
        full_im[f] = im[f];
    }
    for f in bins..n {
        full_re[f] = re[n - f];
        full_im[f] = -im[n - f];
    }
    let mut frame = vec![0.0; n];
    for (j, out) in frame.iter_mut().enumerate() {
        let mut acc = 0.0;
        for f in 0..n {
            let w = 2.0 * std::f64::consts::PI * (f * j) as f64 / n as f64;
            acc += full_re[f] * w.cos() - full_im[f] * w.sin();
        }
        *out = acc / n as f64;
    }
    frame
}

/// Reflect (mirror-without-repeat) index lookup used for analysis padding:
/// index -1 maps to 1, index n maps to n - 2, bouncing as often as needed.
pub fn reflect_index(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    assert!(n > 0);
    if n == 1 {
        return 0;
    }
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

/// Centered short-time analysis by direct loops: reflect-pad `n_fft / 2` on
/// both ends, take `1 + len / hop` frames, window each, run [`rdft_naive`].
/// Returns `(re, im)` as `[bins][frames]` row-major flats plus the frame count.
pub fn stft_naive(x: &[f64], n_fft: usize, hop: usize, window: &[f64]) -> (Vec<f64>, Vec<f64>, usize) {
    assert_eq!(window.len(), n_fft);
    let pad = n_fft / 2;
    let frames = 1 + x.len() / hop;
    let bins = n_fft / 2 + 1;
    let mut re = vec![0.0; bins * frames];
    let mut im = vec![0.0; bins * frames];
    let mut frame = vec![0.0; n_fft];
    for t in 0..frames {
        for (j, slot) in frame.iter_mut().enumerate() {
            let src = (t * hop + j) as isize - pad as isize;
            *slot = x[reflect_index(src, x.len())] * window[j];
        }
        let (fre, fim) = rdft_naive(&frame);
        for f in 0..bins {
            re[f * frames + t] = fre[f];
            im[f * frames + t] = fim[f];
        }
    }
    (re, im, frames)
}

/// Weighted overlap-add inverse of [`stft_naive`]: per-frame [`irdft_naive`],
/// multiply by the window, accumulate, divide by the summed squared window,
/// then trim the analysis padding. Returns `out_len` samples.
#[allow(clippy::too_many_arguments)]
pub fn istft_naive(
    re: &[f64],
    im: &[f64],
    frames: usize,
    n_fft: usize,
    hop: usize,
    window: &[f64],
    out_len: usize,
) -> Vec<f64> {
    let bins = n_fft / 2 + 1;
    let pad = n_fft / 2;
    let total = (frames - 1) * hop + n_fft;
    let mut acc = vec![0.0; total];
    let mut den = vec![0.0; total];
    for t in 0..frames {
        let fre: Vec<f64> = (0..bins).map(|f| re[f * frames + t]).collect();
        let fim: Vec<f64> = (0..bins).map(|f| im[f * frames + t]).collect();
        let frame = irdft_naive(&fre, &fim, n_fft);
        for j in 0..n_fft {
            acc[t * hop + j] += frame[j] * window[j];
            den[t * hop + j] += window[j] * window[j];
        }
    }
    let mut out = vec![0.0; out_len];
    for (s, slot) in out.iter_mut().enumerate() {
        let i = s + pad;
        assert!(den[i] > 0.0, "overlap-add normalizer vanished at sample {s}");
        *slot = acc[i] / den[i];
    }
    out
}

// ── Signal statistics ───────────────────────────────────────────────────────

/// Root-mean-square level of a signal.
pub fn rms_naive(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// SNR in dB between a clean signal and an additive noise component.
pub fn measured_snr_db(clean: &[f64], noise: &[f64]) -> f64 {
    20.0 * (rms_naive(clean) / rms_naive(noise)).log10()
}

/// Median of a sample (mean of the central pair for even counts).
pub fn median_naive(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

// ── Probability and losses ──────────────────────────────────────────────────

pub fn sigmoid_naive(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Numerically plain softmax (max-shifted for safety).
pub fn softmax_naive(x: &[f64]) -> Vec<f64> {
    let m = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.iter().map(|e| e / z).collect()
}

/// Cross-entropy of a softmax over `logits` against a hard `label`.
pub fn cross_entropy_naive(logits: &[f64], label: usize) -> f64 {
    -softmax_naive(logits)[label].ln()
}

/// KL(p || q) = sum_i p_i (ln p_i - ln q_i), with 0 ln 0 = 0.
pub fn kl_div_naive(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pi, &qi)| if pi == 0.0 { 0.0 } else { pi * (pi.ln() - qi.ln()) })
        .sum()
}

/// Temperature-scaled distillation loss:
/// tau^2 * KL(softmax(teacher / tau) || softmax(student / tau)).
pub fn kd_loss_naive(teacher: &[f64], student: &[f64], tau: f64) -> f64 {
    let p = softmax_naive(&teacher.iter().map(|v| v / tau).collect::<Vec<_>>());
    let q = softmax_naive(&student.iter().map(|v| v / tau).collect::<Vec<_>>());
    tau * tau * kl_div_naive(&p, &q)
}

/// Mean squared error between two equal-length grids.
pub fn mse_naive(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Angular-margin softmax loss on a raw logit vector, computed through the
/// trigonometric definition (acos / cos) rather than polynomial identities.
///
/// The logit vector y is read as magnitude r = |y| times direction cosines
/// c_j = y_j / r against each class axis. The true-class logit is replaced by
/// r * (lambda c + psi(theta)) / (1 + lambda) with
/// psi(theta) = (-1)^k cos(m theta) - 2k on theta in [k pi / m, (k+1) pi / m],
/// then ordinary cross-entropy is taken. At m = 1 this is exactly softmax CE.
pub fn asoftmax_naive(logits: &[f64], label: usize, margin: u32, lambda: f64) -> f64 {
    let r = logits.iter().map(|v| v * v).sum::<f64>().sqrt();
    let c = (logits[label] / r).clamp(-1.0, 1.0);
    let theta = c.acos();
    let m = margin as f64;
    let k = ((m * theta / std::f64::consts::PI).floor() as i64).min(margin as i64);
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    let psi = sign * (m * theta).cos() - 2.0 * k as f64;
    let f = (lambda * c + psi) / (1.0 + lambda);
    let mut modified = logits.to_vec();
    modified[label] = r * f;
    cross_entropy_naive(&modified, label)
}

// ── Detection metrics ───────────────────────────────────────────────────────

/// Equal error rate by brute-force threshold enumeration, O(n^2).
///
/// Decision rule: accept as bona fide when score >= t, so
/// FAR(t) = P(spoof >= t) and FRR(t) = P(bona < t). Every distinct score is
/// tried as a threshold (plus one above the maximum); the EER is linearly
/// interpolated on the last segment where FAR >= FRR. Returns
/// `(eer, threshold)`.
pub fn eer_brute(bona: &[f64], spoof: &[f64]) -> (f64, f64) {
    assert!(!bona.is_empty() && !spoof.is_empty());
    let mut thresholds: Vec<f64> = bona.iter().chain(spoof).cloned().collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();
    let top = thresholds[thresholds.len() - 1] + 1.0;
    thresholds.push(top);

    let point = |t: f64| -> (f64, f64) {
        let fa = spoof.iter().filter(|&&s| s >= t).count() as f64 / spoof.len() as f64;
        let fr = bona.iter().filter(|&&s| s < t).count() as f64 / bona.len() as f64;
        (fa, fr)
    };

    let mut last_above = 0;
    for (i, &t) in thresholds.iter().enumerate() {
        let (fa, fr) = point(t);
        if fa >= fr {
            last_above = i;
        }
    }
    let (fa1, fr1) = point(thresholds[last_above]);
    if last_above + 1 == thresholds.len() {
        return (0.5 * (fa1 + fr1), thresholds[last_above]);
    }
    let (fa2, fr2) = point(thresholds[last_above + 1]);
    let d1 = fa1 - fr1;
    let d2 = fr2 - fa2;
    let alpha = if d1 + d2 == 0.0 { 0.0 } else { d1 / (d1 + d2) };
    let eer = fa1 + alpha * (fa2 - fa1);
    let threshold = thresholds[last_above] + alpha * (thresholds[last_above + 1] - thresholds[last_above]);
    (eer, threshold)
}

// ── Interactive fusion formulas ─────────────────────────────────────────────

/// Channel-interaction step by direct loops: two distinct 3x3 convolutions
/// over the channel concatenation, a sigmoid gate, and gated residual sums.
///
/// Returns `(x_fusion, w, xe_tilde, xn_tilde)`, each `[c, f, t]`.
#[allow(clippy::too_many_arguments)]
pub fn channel_interaction_naive(
    xe: &[f64],
    xn: &[f64],
    (c, f, t): (usize, usize, usize),
    w1: &[f64],
    b1: &[f64],
    w2: &[f64],
    b2: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut cat = Vec::with_capacity(2 * c * f * t);
    cat.extend_from_slice(xe);
    cat.extend_from_slice(xn);
    let x_fusion = conv2d_naive(&cat, (2 * c, f, t), w1, (c, 3, 3), Some(b1), (1, 1), (1, 1));
    let gate_raw = conv2d_naive(&cat, (2 * c, f, t), w2, (c, 3, 3), Some(b2), (1, 1), (1, 1));
    let w: Vec<f64> = gate_raw.iter().map(|&v| sigmoid_naive(v)).collect();
    let xe_tilde: Vec<f64> = (0..c * f * t).map(|i| x_fusion[i] + w[i] * xe[i]).collect();
    let xn_tilde: Vec<f64> = (0..c * f * t).map(|i| x_fusion[i] + w[i] * xn[i]).collect();
    (x_fusion, w, xe_tilde, xn_tilde)
}

/// Spatial-fusion step by direct loops: channel max + channel mean of the
/// noisy branch, a 7x7 convolution to one channel, sigmoid mask M, and the
/// convex blend (1 - M) xe + M xn broadcast over channels.
///
/// Returns `(mask, x_inter)` with mask `[f, t]` and x_inter `[c, f, t]`.
pub fn spatial_fuse_naive(
    xe_tilde: &[f64],
    xn_tilde: &[f64],
    (c, f, t): (usize, usize, usize),
    wm: &[f64],
    bm: f64,
) -> (Vec<f64>, Vec<f64>) {
    let plane = f * t;
    let mut pooled = vec![0.0; 2 * plane];
    for i in 0..plane {
        let mut best = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for ch in 0..c {
            let v = xn_tilde[ch * plane + i];
            best = best.max(v);
            sum += v;
        }
        pooled[i] = best;
        pooled[plane + i] = sum / c as f64;
    }
    let raw = conv2d_naive(&pooled, (2, f, t), wm, (1, 7, 7), Some(&[bm]), (1, 1), (3, 3));
    let mask: Vec<f64> = raw.iter().map(|&v| sigmoid_naive(v)).collect();
    let mut x_inter = vec![0.0; c * plane];
    for ch in 0..c {
        for i in 0..plane {
            let m = mask[i];
            x_inter[ch * plane + i] = (1.0 - m) * xe_tilde[ch * plane + i] + m * xn_tilde[ch * plane + i];
        }
    }
    (mask, x_inter)
}

// ── Frame-axis normalization ────────────────────────────────────────────────

/// Tile-or-truncate a `[bins, frames]` grid along the frame axis to exactly
/// `target` frames: long inputs keep their first `target` frames, short ones
/// repeat from the start.
pub fn tile_frames_naive(grid: &[f64], bins: usize, frames: usize, target: usize) -> Vec<f64> {
    assert_eq!(grid.len(), bins * frames);
    let mut out = vec![0.0; bins * target];
    for b in 0..bins {
        for t in 0..target {
            out[b * target + t] = grid[b * frames + (t % frames)];
        }
    }
    out
}
