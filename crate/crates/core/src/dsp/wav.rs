//! Minimal RIFF wav reader/writer for 16-bit mono PCM.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Write samples (clamped to [-1, 1]) as 16-bit mono PCM.
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + samples.len() * 2);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits per sample
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in samples {
        let q = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a 16-bit mono PCM wav. Returns samples in [-1, 1) and the sample
/// rate. Multichannel, float, or compressed files are rejected.
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, u32)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let fail = |reason: &str| Error::format(path, reason);
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(fail("not a RIFF/WAVE file"));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]);
    let mut pos = 12usize;
    let mut fmt: Option<(u16, u16, u32, u16)> = None; // codec, channels, rate, bits
    let mut data: Option<(usize, usize)> = None; // offset, len
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32_at(pos + 4) as usize;
        let body = pos + 8;
        if body + len > bytes.len() {
            return Err(fail("chunk extends past end of file"));
        }
        if id == b"fmt " {
            if len < 16 {
                return Err(fail("fmt chunk too short"));
            }
            fmt = Some((u16_at(body), u16_at(body + 2), u32_at(body + 4), u16_at(body + 14)));
        } else if id == b"data" {
            data = Some((body, len));
        }
        pos = body + len + (len & 1); // chunks are word-aligned
    }
    let (codec, channels, rate, bits) = fmt.ok_or_else(|| fail("missing fmt chunk"))?;
    if codec != 1 {
        return Err(fail("only PCM encoding is supported"));
    }
    if channels != 1 {
        return Err(fail("only mono files are supported"));
    }
    if bits != 16 {
        return Err(fail("only 16-bit samples are supported"));
    }
    let (off, len) = data.ok_or_else(|| fail("missing data chunk"))?;
    if len % 2 != 0 {
        return Err(fail("data chunk has an odd byte count"));
    }
    let samples = (0..len / 2)
        .map(|i| i16::from_le_bytes([bytes[off + 2 * i], bytes[off + 2 * i + 1]]) as f64 / 32768.0)
        .collect();
    Ok((samples, rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_then_read_preserves_samples_to_quantizer_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.wav");
        let x: Vec<f64> = (0..500).map(|i| (0.05 * i as f64).sin() * 0.8).collect();
        write_wav(&path, &x, 16000).unwrap();
        let (y, rate) = read_wav(&path).unwrap();
        assert_eq!(rate, 16000);
        assert_eq!(y.len(), x.len());
        // Write scales by 32767, read by 1/32768: up to 1.5 quantizer steps.
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() <= 1.5 / 32768.0 + 1e-9);
        }
    }

    #[test]
    fn out_of_range_samples_are_clamped_not_wrapped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.wav");
        write_wav(&path, &[2.0, -2.0, 0.0], 8000).unwrap();
        let (y, _) = read_wav(&path).unwrap();
        assert!((y[0] - 32767.0 / 32768.0).abs() < 1e-9);
        assert!((y[1] + 32767.0 / 32768.0).abs() < 1e-9);
        assert_eq!(y[2], 0.0);
    }

    #[test]
    fn garbage_and_truncated_files_are_rejected_with_format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.wav");
        std::fs::write(&path, b"not audio at all").unwrap();
        assert!(matches!(read_wav(&path), Err(Error::Format { .. })));
        let path2 = dir.path().join("trunc.wav");
        let x = vec![0.1; 100];
        write_wav(&path2, &x, 16000).unwrap();
        let bytes = std::fs::read(&path2).unwrap();
        std::fs::write(&path2, &bytes[..50]).unwrap();
        assert!(matches!(read_wav(&path2), Err(Error::Format { .. })));
    }

    #[test]
    fn missing_file_is_an_io_error() {
        assert!(matches!(
            read_wav(Path::new("/nonexistent/nowhere.wav")),
            Err(Error::Io { .. })
        ));
    }
}
