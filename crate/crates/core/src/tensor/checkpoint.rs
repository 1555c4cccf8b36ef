//! Flat binary checkpoint format for named tensors.
//!
//! Layout (all integers little-endian):
//!   magic "SPCK" | version u32 | tensor count u32 |
//!   per tensor: name len u32 | name UTF-8 | rank u32 | dims u32... |
//!               values f32...
//!
//! Values are stored as f32 — checkpoints are for resuming and scoring, not
//! for extending a gradient trace, so the precision loss is acceptable and
//! halves the file size.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"SPCK";
const VERSION: u32 = 1;
const MAX_NAME: usize = 4096;
const MAX_RANK: usize = 8;

pub fn save(path: &Path, entries: &[(String, Tensor)]) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    for (name, tensor) in entries {
        if name.len() > MAX_NAME {
            return Err(Error::InvalidArgument(format!("tensor name of {} bytes", name.len())));
        }
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(tensor.shape().len() as u32).to_le_bytes());
        for &d in tensor.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in tensor.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let fail = |reason: String| Error::format(path, &reason);
    let mut pos = 0usize;
    let need = |pos: usize, n: usize| -> Result<()> {
        if pos + n > bytes.len() {
            Err(Error::format(path, "truncated checkpoint"))
        } else {
            Ok(())
        }
    };
    need(pos, 8)?;
    if &bytes[0..4] != MAGIC {
        return Err(fail("bad magic; not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(fail(format!("unsupported checkpoint version {version}")));
    }
    pos = 8;
    need(pos, 4)?;
    let count = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
    pos += 4;
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        need(pos, 4)?;
        let name_len = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        pos += 4;
        if name_len > MAX_NAME {
            return Err(fail(format!("tensor name of {name_len} bytes")));
        }
        need(pos, name_len)?;
        let name = std::str::from_utf8(&bytes[pos..pos + name_len])
            .map_err(|_| Error::format(path, "tensor name is not UTF-8"))?
            .to_string();
        pos += name_len;
        need(pos, 4)?;
        let rank = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        pos += 4;
        if rank == 0 || rank > MAX_RANK {
            return Err(fail(format!("tensor {name} has rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            need(pos, 4)?;
            shape.push(u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize);
            pos += 4;
        }
        let numel: usize = shape.iter().product();
        if numel == 0 || numel > (1 << 31) {
            return Err(fail(format!("tensor {name} has implausible shape {shape:?}")));
        }
        need(pos, 4 * numel)?;
        let data: Vec<f64> = (0..numel)
            .map(|i| {
                f32::from_le_bytes(bytes[pos + 4 * i..pos + 4 * i + 4].try_into().unwrap()) as f64
            })
            .collect();
        pos += 4 * numel;
        entries.push((name, Tensor::new(shape, data)?));
    }
    if pos != bytes.len() {
        return Err(fail("trailing bytes after last tensor".into()));
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_names_shapes_and_values_to_f32() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let entries = vec![
            ("stem.w".to_string(), Tensor::new(vec![2, 3], vec![0.1, -0.25, 3.5, 1e-7, -42.0, 0.0]).unwrap()),
            ("stem.b".to_string(), Tensor::new(vec![2], vec![1.5, -0.5]).unwrap()),
        ];
        save(&path, &entries).unwrap();
        let back = load(&path).unwrap();
        assert_eq!(back.len(), 2);
        for ((n1, t1), (n2, t2)) in entries.iter().zip(&back) {
            assert_eq!(n1, n2);
            assert_eq!(t1.shape(), t2.shape());
            for (a, b) in t1.data().iter().zip(t2.data()) {
                assert_eq!(*a as f32, *b as f32);
            }
        }
    }

    #[test]
    fn corrupted_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, b"XXXX000000").unwrap();
        assert!(matches!(load(&path), Err(Error::Format { .. })));

        let good = dir.path().join("good.ckpt");
        save(&good, &[("w".into(), Tensor::full(vec![10], 1.0))]).unwrap();
        let bytes = std::fs::read(&good).unwrap();
        let trunc = dir.path().join("trunc.ckpt");
        std::fs::write(&trunc, &bytes[..bytes.len() - 7]).unwrap();
        assert!(matches!(load(&trunc), Err(Error::Format { .. })));

        let extra = dir.path().join("extra.ckpt");
        let mut b2 = bytes.clone();
        b2.extend_from_slice(&[0u8; 3]);
        std::fs::write(&extra, b2).unwrap();
        assert!(matches!(load(&extra), Err(Error::Format { .. })));
    }
}
