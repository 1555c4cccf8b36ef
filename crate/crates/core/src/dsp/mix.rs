//! Additive noise mixing at an exact signal-to-noise ratio.

use crate::error::{Error, Result};

pub fn rms(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    (x.iter().map(|&v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

/// Ratio of clean power to added-noise power in decibels.
pub fn measured_snr_db(clean: &[f64], added: &[f64]) -> f64 {
    20.0 * (rms(clean) / rms(added)).log10()
}

/// Cut a clean-length segment out of `noise`, starting at `offset` and
/// wrapping cyclically when the noise is shorter than the utterance.
pub fn noise_segment(noise: &[f64], offset: usize, len: usize) -> Result<Vec<f64>> {
    if noise.is_empty() {
        return Err(Error::InvalidArgument("noise recording is empty".into()));
    }
    Ok((0..len).map(|i| noise[(offset + i) % noise.len()]).collect())
}

/// Mix `noise` (cyclically from `offset`) into `clean` so the resulting
/// ratio is exactly `snr_db`. Returns the mixture and the gain applied to
/// the noise segment. Silent inputs cannot satisfy an exact ratio and are
/// rejected.
pub fn mix_at_snr(clean: &[f64], noise: &[f64], snr_db: f64, offset: usize) -> Result<(Vec<f64>, f64)> {
    let seg = noise_segment(noise, offset, clean.len())?;
    let rc = rms(clean);
    let rn = rms(&seg);
    if rc <= 0.0 {
        return Err(Error::InvalidArgument("clean waveform is silent; ratio is undefined".into()));
    }
    if rn <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "noise segment at offset {offset} is silent; ratio is undefined"
        )));
    }
    let gain = rc / (rn * 10f64.powf(snr_db / 20.0));
    let mixed = clean.iter().zip(&seg).map(|(&c, &n)| c + gain * n).collect();
    Ok((mixed, gain))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(n: usize, w: f64, a: f64) -> Vec<f64> {
        (0..n).map(|i| a * (w * i as f64).sin()).collect()
    }

    #[test]
    fn achieved_ratio_matches_the_request_to_a_microdecibel() {
        let clean = tone(4000, 0.13, 0.4);
        let noise = tone(9000, 0.71, 0.05);
        for snr in [-5.0, 0.0, 5.0, 20.0] {
            let (mixed, gain) = mix_at_snr(&clean, &noise, snr, 123).unwrap();
            let added: Vec<f64> = mixed.iter().zip(&clean).map(|(m, c)| m - c).collect();
            assert!((measured_snr_db(&clean, &added) - snr).abs() < 1e-6);
            assert!(gain > 0.0);
        }
    }

    #[test]
    fn gain_is_equivariant_to_input_scaling() {
        let clean = tone(2000, 0.21, 0.3);
        let noise = tone(5000, 0.57, 0.2);
        let (_, g1) = mix_at_snr(&clean, &noise, 10.0, 7).unwrap();
        let clean2: Vec<f64> = clean.iter().map(|v| v * 3.0).collect();
        let (_, g2) = mix_at_snr(&clean2, &noise, 10.0, 7).unwrap();
        assert!((g2 / g1 - 3.0).abs() < 1e-12);
        let noise2: Vec<f64> = noise.iter().map(|v| v * 5.0).collect();
        let (_, g3) = mix_at_snr(&clean, &noise2, 10.0, 7).unwrap();
        assert!((g3 * 5.0 / g1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn short_noise_wraps_cyclically_from_the_offset() {
        let noise = vec![1.0, 2.0, 3.0];
        let seg = noise_segment(&noise, 2, 5).unwrap();
        assert_eq!(seg, vec![3.0, 1.0, 2.0, 3.0, 1.0]);
    }

    #[test]
    fn silent_inputs_are_rejected() {
        let clean = tone(100, 0.3, 0.5);
        assert!(mix_at_snr(&[0.0; 100], &clean, 0.0, 0).is_err());
        assert!(mix_at_snr(&clean, &[0.0; 50], 0.0, 0).is_err());
        assert!(mix_at_snr(&clean, &[], 0.0, 0).is_err());
    }
}
